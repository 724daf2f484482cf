import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import project_l1_by_bisection, tv1d_by_dual_bvls
from proxfwi.regularizers import (
    TV1D,
    Box,
    L1Ball,
    L1Penalty,
    TV2DAnisotropic,
    Zero,
    make_regularizer,
    project_l1_ball,
    project_l1_ball_sort,
    prox,
    reg_value,
    soft_threshold,
)

finite_vec = arrays(np.float64, st.integers(1, 40), elements=st.floats(-50, 50))


class TestValues:
    def test_l1_penalty(self):
        assert reg_value(L1Penalty(2.0), [1.0, -3.0]) == 8.0

    def test_l1_ball_feasible(self):
        assert reg_value(L1Ball(1.0), [0.5, 0.4]) == 0.0

    def test_l1_ball_infeasible(self):
        assert reg_value(L1Ball(1.0), [2.0, 0.0]) == np.inf

    def test_box(self):
        b = Box(0.0, 1.0)
        assert b.value([0.0, 0.5, 1.0]) == 0.0
        assert b.value([0.0, 1.1]) == np.inf

    def test_tv(self):
        assert TV1D(0.5).value([0.0, 2.0, 1.0]) == pytest.approx(1.5)
        tv = TV2DAnisotropic(1.0, (2, 2))
        # grid [[0, 1], [2, 4]] stored z-fastest
        assert tv.value([0.0, 2.0, 1.0, 4.0]) == pytest.approx(2 + 3 + 1 + 2)

    def test_tv2d_shape_mismatch(self):
        with pytest.raises(ValueError):
            TV2DAnisotropic(1.0, (3, 3)).value(np.zeros(8))

    def test_feasible_after_projection(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            y = rng.standard_normal(200) * 10
            assert L1Ball(3.3).value(project_l1_ball(y, 3.3)) == 0.0


class TestProxExamples:
    def test_soft_threshold(self):
        np.testing.assert_array_equal(prox(L1Penalty(1.0), [2.0, -0.5, -3.0], 1.0), [1.0, 0.0, -2.0])

    def test_l1_ball_single_nonzero(self):
        np.testing.assert_allclose(prox(L1Ball(1.0), [3.0, 0.0], 1.0), [1.0, 0.0])

    def test_l1_ball_two_entries(self):
        expected = project_l1_by_bisection(np.array([2.0, 1.0]), 1.0)
        np.testing.assert_allclose(expected, [1.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(prox(L1Ball(1.0), [2.0, 1.0], 1.0), expected, atol=1e-12)

    def test_tv1d_two_points(self):
        # brute force over a grid of (g1, g2)
        g = np.linspace(-1, 5, 1201)
        G1, G2 = np.meshgrid(g, g, indexing="ij")
        obj = 0.5 * (G1 - 0) ** 2 + 0.5 * (G2 - 4) ** 2 + np.abs(G1 - G2)
        i, j = np.unravel_index(np.argmin(obj), obj.shape)
        np.testing.assert_allclose([g[i], g[j]], [1.0, 3.0], atol=1e-9)
        np.testing.assert_allclose(prox(TV1D(1.0), [0.0, 4.0], 1.0), [1.0, 3.0], atol=1e-12)

    @pytest.mark.parametrize("t", [0.1, 1.0, 7.0])
    def test_box_clamp(self, t):
        np.testing.assert_array_equal(prox(Box(0.0, 1.0), [-0.5, 0.3, 7.0], t), [0.0, 0.3, 1.0])

    def test_zero(self):
        np.testing.assert_array_equal(prox(Zero(), [1.0, -2.0], 3.0), [1.0, -2.0])

    @pytest.mark.parametrize("reg", [Zero(), Box(0, 1), L1Penalty(1.0), L1Ball(1.0), TV1D(1.0)])
    @pytest.mark.parametrize("t", [0.0, -1.0])
    def test_bad_step(self, reg, t):
        with pytest.raises(ValueError):
            reg.prox(np.ones(3), t)

    def test_constructor_checks(self):
        with pytest.raises(ValueError):
            Box(1.0, 0.0)
        with pytest.raises(ValueError):
            L1Penalty(-1.0)
        with pytest.raises(ValueError):
            L1Ball(0.0)
        with pytest.raises(ValueError):
            project_l1_ball(np.ones(3), -1.0)


class TestL1Ball:
    def test_feasible_fixed_point(self):
        y = np.array([0.2, -0.3, 0.1])
        np.testing.assert_array_equal(project_l1_ball(y, 1.0), y)

    def test_matches_sort_reference(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            y = rng.standard_normal(50) * 2
            np.testing.assert_allclose(project_l1_ball(y, 1.0), project_l1_ball_sort(y, 1.0), atol=1e-14, rtol=0)

    def test_ties(self):
        y = np.array([1.0, 1.0, 1.0, -1.0, 0.5])
        np.testing.assert_allclose(project_l1_ball(y, 2.0), project_l1_by_bisection(y, 2.0), atol=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(finite_vec, st.floats(0.01, 100.0))
    def test_is_soft_threshold_and_feasible(self, y, tau):
        g = project_l1_ball(y, tau)
        assert np.abs(g).sum() <= tau * (1 + 1e-12) + 1e-300
        np.testing.assert_allclose(g, project_l1_by_bisection(y, tau), atol=1e-9 * max(1.0, np.abs(y).max()))


class TestTV:
    def test_constant_is_fixed(self):
        y = np.full(17, 3.25)
        np.testing.assert_allclose(TV1D(2.0).prox(y, 1.0), y, rtol=0, atol=1e-14)

    def test_against_dual_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            n = rng.integers(1, 60)
            y = rng.standard_normal(n) * rng.uniform(0.1, 5)
            lam = rng.uniform(0, 2)
            np.testing.assert_allclose(TV1D(lam).prox(y, 1.0), tv1d_by_dual_bvls(y, lam), atol=1e-9)

    def test_step_scales_weight(self):
        y = np.array([0.0, 3.0, -1.0, 2.0])
        np.testing.assert_allclose(TV1D(0.5).prox(y, 2.0), TV1D(1.0).prox(y, 1.0))

    def test_tv2d_reduces_to_1d_on_a_row(self):
        y = np.array([0.0, 4.0, 1.0, 1.5])
        tv = TV2DAnisotropic(0.7, (1, 4))
        np.testing.assert_allclose(tv.prox(y, 1.0), TV1D(0.7).prox(y, 1.0), atol=1e-10)


def prox_objective(reg, g, y, t):
    return 0.5 * np.sum((g - y) ** 2) + t * reg.value(g)


REGS = [
    Zero(),
    Box(-0.5, 0.8),
    L1Penalty(0.7),
    L1Ball(2.0),
    TV1D(0.6),
]


@pytest.mark.parametrize("reg", REGS, ids=lambda r: type(r).__name__)
def test_prox_optimality_by_perturbation(reg):
    rng = np.random.default_rng(1)
    n = 12
    y = 2 * rng.standard_normal(n)
    t = 0.8
    g = reg.prox(y, t)
    base = prox_objective(reg, g, y, t)
    for _ in range(1000):
        gp = g + rng.standard_normal(n) * 10.0 ** rng.uniform(-6, 0)
        if isinstance(reg, (Box, L1Ball)):
            gp = reg.prox(gp, 1.0)
        assert base <= prox_objective(reg, gp, y, t) + 1e-10


def test_tv2d_prox_optimality():
    rng = np.random.default_rng(2)
    reg = TV2DAnisotropic(0.4, (6, 5))
    y = rng.standard_normal(30)
    g = reg.prox(y, 1.0)
    base = prox_objective(reg, g, y, 1.0)
    for _ in range(1000):
        gp = g + rng.standard_normal(30) * 10.0 ** rng.uniform(-6, 0)
        assert base <= prox_objective(reg, gp, y, 1.0) + 1e-6


@pytest.mark.parametrize("reg", REGS + [TV2DAnisotropic(0.3, (4, 3))], ids=lambda r: type(r).__name__)
def test_firmly_nonexpansive(reg):
    rng = np.random.default_rng(4)
    for _ in range(100):
        y1, y2 = rng.standard_normal((2, 12)) * 2
        p1, p2 = reg.prox(y1, 1.0), reg.prox(y2, 1.0)
        assert np.linalg.norm(p1 - p2) <= np.linalg.norm(y1 - y2) + 1e-10
        assert np.sum((p1 - p2) ** 2) <= (p1 - p2) @ (y1 - y2) + 1e-10


def test_zero_set_grows_with_lambda():
    rng = np.random.default_rng(9)
    y = rng.standard_normal(500)
    zeros = [np.count_nonzero(soft_threshold(y, lam) == 0) for lam in np.linspace(0, 3, 31)]
    assert all(a <= b for a, b in zip(zeros, zeros[1:]))
    small = np.abs(y) <= 0.5
    assert np.all(soft_threshold(y, 0.5)[small] == 0)


def test_make_regularizer():
    assert make_regularizer({"kind": "l1", "lam": 0.5}) == L1Penalty(0.5)
    assert make_regularizer({"kind": "l1_ball", "tau": 2}) == L1Ball(2.0)
    assert isinstance(make_regularizer({"kind": "tv2d", "lam": 1}, (4, 4)), TV2DAnisotropic)
    with pytest.raises(ValueError):
        make_regularizer({"kind": "tv2d", "lam": 1})
    with pytest.raises(ValueError):
        make_regularizer({"kind": "nuclear"})
