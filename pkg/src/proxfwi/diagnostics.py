"""Finite-difference checks of the adjoint-state gradient."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .helmholtz import AcquisitionGeometry, Grid, GridModel2D, predict_data
from .objective import CompositeProblem
from .penalties import Huber, LeastSquares, StudentT
from .transforms import HaarWavelet2D, Identity

__all__ = ["GradCheck", "small_problem", "gradient_check", "gradcheck_suite"]


@dataclass(frozen=True)
class GradCheck:
    penalty: str
    transform: str
    coords: tuple
    adjoint: tuple
    finite_diff: tuple

    @property
    def rel_errors(self):
        a = np.asarray(self.adjoint)
        f = np.asarray(self.finite_diff)
        return np.abs(a - f) / np.maximum(np.abs(a), np.abs(f))

    @property
    def max_rel_error(self):
        return float(self.rel_errors.max())


def small_problem(penalty, transform=None, seed=0, n=12):
    """12 x 12 test problem: 2 sources, receivers on 2 rows, 2 frequencies.

    The model is a random perturbation of 2000 m/s, the data come
    from a different random model so every penalty sees nonzero residuals.
    """
    rng = np.random.default_rng(seed)
    grid = Grid(n, n, 10.0, sponge_width=3, sponge_gamma=1.0)

    def random_model():
        v = 2000.0 + 300.0 * rng.uniform(-1, 1, grid.shape)
        return GridModel2D.from_velocity(grid, v)

    lo, hi = 3, n - 4
    geom = AcquisitionGeometry(
        [(lo, lo + 1), (lo, hi - 1)],
        [(lo, ix) for ix in range(lo, hi + 1)] + [(hi, ix) for ix in range(lo, hi + 1)],
        2 * np.pi * np.array([8.0, 12.0]),
    )
    m0 = random_model()
    data = predict_data(random_model(), geom)
    problem = CompositeProblem(
        grid, geom, data, penalty, transform=transform or Identity(), model_scale=float(m0.m.mean())
    )
    return problem, problem.to_coeffs(m0.m)


def gradient_check(problem, y, n_coords=5, seed=0):
    """Compare the gradient with central differences in random coordinates.

    Steps follow the cube-root-of-eps rule ``h_i = eps^(1/3) * max(1, |y_i|)``.
    """
    rng = np.random.default_rng(seed)
    coords = rng.choice(y.size, size=n_coords, replace=False)
    g = problem.eval_smooth(y).gradient
    fd = []
    for i in coords:
        h = np.cbrt(np.finfo(float).eps) * max(1.0, abs(y[i]))
        yp, ym = y.copy(), y.copy()
        yp[i] += h
        ym[i] -= h
        fd.append((problem.eval_smooth(yp).smooth - problem.eval_smooth(ym).smooth) / (2 * h))
    return tuple(int(i) for i in coords), tuple(float(g[i]) for i in coords), tuple(fd)


def gradcheck_suite(seed=0, n_coords=5):
    """Run the check for every penalty with the identity and Haar transforms."""
    penalties = {"ls": LeastSquares(), "huber": Huber(0.02), "student_t": StudentT(4e-4)}
    out = []
    for pname, pen in penalties.items():
        for tname in ("identity", "haar"):
            tr = Identity() if tname == "identity" else HaarWavelet2D((12, 12), 2)
            problem, y = small_problem(pen, tr, seed)
            coords, adj, fd = gradient_check(problem, y, n_coords, seed)
            out.append(GradCheck(pname, tname, coords, adj, fd))
    return out
