"""Composite objective ``phi(y) = sum_w rho(h(C y), D_w) + R(y)``."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .helmholtz import (
    AcquisitionGeometry,
    FrequencyData,
    Grid,
    GridModel2D,
    InvalidModelError,
    misfit_and_gradient,
)
from .regularizers import Zero
from .transforms import Identity

__all__ = ["EvalRecord", "CompositeProblem", "SmoothProblem", "eval_smooth", "eval_total"]


@dataclass(frozen=True)
class EvalRecord:
    """One evaluation of the composite objective at ``y``."""

    smooth: float
    reg: float
    gradient: np.ndarray
    ls_residual: float = float("nan")
    pde_solve_count: int = 0

    @property
    def total(self):
        return self.smooth + self.reg


@dataclass
class CompositeProblem:
    """Waveform-inversion objective in transform coordinates.

    The model is ``m = model_scale * C y``. ``model_scale`` lets the
    optimizer work with O(1) coefficients although squared slowness is
    O(1e-7) s^2/m^2. ``bounds = (lo, hi)`` is an optional physical box on
    ``m``; a trial model outside it (or non-positive) raises
    :class:`InvalidModelError`, which the line search treats as a backtrack
    signal rather than an error.
    """

    grid: Grid
    geometry: AcquisitionGeometry
    data: FrequencyData
    penalty: object
    regularizer: object = Zero()
    transform: object = Identity()
    model_scale: float = 1.0
    bounds: tuple[float, float] | None = None
    freq_weights: np.ndarray | None = None
    threads: int = 1

    def __post_init__(self):
        self.geometry.validate(self.grid)
        if self.data.values.shape[1:] != (self.geometry.n_recv, self.geometry.n_src):
            raise ValueError("observed data do not match the acquisition geometry")
        if len(self.data.omegas) != len(self.geometry.omegas):
            raise ValueError("observed data and geometry have different frequency counts")
        if not self.model_scale > 0:
            raise ValueError("model_scale must be > 0")
        if self.freq_weights is not None:
            self.freq_weights = np.asarray(self.freq_weights, dtype=float)
            if self.freq_weights.shape != (len(self.geometry.omegas),):
                raise ValueError("one weight per frequency expected")

    @property
    def n(self):
        return self.grid.size

    def to_model(self, y):
        return self.model_scale * self.transform.apply(y)

    def to_coeffs(self, m):
        """Coefficients of model ``m``; exact inverse of :meth:`to_model` for orthonormal transforms."""
        return self.transform.adjoint(np.asarray(m, dtype=float)) / self.model_scale

    def model(self, y):
        m = self.to_model(y)
        if self.bounds is not None:
            lo, hi = self.bounds
            bad = np.nonzero((m < lo) | (m > hi))[0]
            if bad.size:
                raise InvalidModelError(f"model outside physical bounds at index {bad[0]}", int(bad[0]))
        return GridModel2D(self.grid, m)

    def eval_smooth(self, y):
        y = np.asarray(y, dtype=float)
        if not np.all(np.isfinite(y)):
            raise ValueError("coefficients contain non-finite entries")
        res = misfit_and_gradient(
            self.model(y), self.geometry, self.data, self.penalty, self.freq_weights, self.threads
        )
        grad = self.model_scale * self.transform.adjoint(res.gradient)
        return EvalRecord(
            smooth=res.value,
            reg=self.regularizer.value(y),
            gradient=grad,
            ls_residual=res.ls_residual,
            pde_solve_count=res.n_solves,
        )

    def eval_total(self, y):
        return self.eval_smooth(y).total


@dataclass
class SmoothProblem:
    """Composite problem from a plain ``fun(y) -> (value, gradient)`` callable.

    Lets the optimizer run on analytic test functions.
    """

    fun: Callable
    regularizer: object = Zero()

    def eval_smooth(self, y):
        y = np.asarray(y, dtype=float)
        f, g = self.fun(y)
        return EvalRecord(float(f), self.regularizer.value(y), np.asarray(g, dtype=float), float(f), 0)

    def eval_total(self, y):
        return self.eval_smooth(y).total


def eval_smooth(p, y) -> EvalRecord:
    return p.eval_smooth(y)


def eval_total(p, y) -> float:
    return p.eval_total(y)
