"""2-D constant-density acoustic Helmholtz modeling and adjoint-state gradients.

The discrete operator is

    H(m, omega) = omega^2 * diag(m * (1 - i*gamma)) + L

with ``L`` the 5-point Laplacian (homogeneous Dirichlet outside the grid)
and ``gamma`` a quadratic sponge ramping from 0 at the inner edge of the
absorbing band to ``sponge_gamma`` at the outer boundary.

Grid vectors are flat and z-fastest: node ``(iz, ix)`` sits at
``iz + nz*ix``.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .penalties import LeastSquares

__all__ = [
    "Grid",
    "GridModel2D",
    "AcquisitionGeometry",
    "FrequencyData",
    "FactorizedOperator",
    "NumericalFailure",
    "InvalidModelError",
    "assemble",
    "factorize",
    "solve",
    "predict_data",
    "misfit_gradient",
    "misfit_and_gradient",
    "MisfitResult",
    "SOLVE_RTOL",
    "COND_LIMIT",
]

SOLVE_RTOL = 1e-10
COND_LIMIT = 1e14
MIN_POINTS_PER_WAVELENGTH = 8


class NumericalFailure(RuntimeError):
    """A Helmholtz system could not be solved to the required accuracy."""

    def __init__(self, msg, omega=None):
        super().__init__(msg)
        self.omega = omega


class InvalidModelError(ValueError):
    """The model has a non-physical entry (non-positive or out of bounds)."""

    def __init__(self, msg, index=None):
        super().__init__(msg)
        self.index = index


@dataclass(frozen=True)
class Grid:
    """Regular grid with ``nz`` x ``nx`` nodes at spacing ``h`` metres."""

    nz: int
    nx: int
    h: float
    sponge_width: int = 10
    sponge_gamma: float = 1.0

    def __post_init__(self):
        if self.nz < 3 or self.nx < 3:
            raise ValueError(f"grid too small: {self.nz} x {self.nx}")
        if not self.h > 0:
            raise ValueError(f"grid spacing must be > 0, got {self.h}")
        if self.sponge_width < 0 or self.sponge_gamma < 0:
            raise ValueError("sponge width and strength must be >= 0")

    @property
    def shape(self):
        return (self.nz, self.nx)

    @property
    def size(self):
        return self.nz * self.nx

    def index(self, iz, ix):
        return np.asarray(iz) + self.nz * np.asarray(ix)

    def is_interior(self, iz, ix):
        w = self.sponge_width
        iz, ix = np.asarray(iz), np.asarray(ix)
        return (iz >= w) & (iz <= self.nz - 1 - w) & (ix >= w) & (ix <= self.nx - 1 - w)

    def damping(self):
        """Sponge profile ``gamma`` as a flat z-fastest vector."""
        w = self.sponge_width
        if w == 0 or self.sponge_gamma == 0:
            return np.zeros(self.size)

        def ramp(n):
            i = np.arange(n)
            d = np.minimum(i, n - 1 - i)
            return np.where(d < w, ((w - d) / w) ** 2, 0.0)

        g = np.maximum.outer(ramp(self.nz), ramp(self.nx))
        return self.sponge_gamma * g.ravel(order="F")

    def laplacian(self):
        def second_diff(n):
            return sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(n, n))

        lap = sp.kron(sp.identity(self.nx), second_diff(self.nz)) + sp.kron(
            second_diff(self.nx), sp.identity(self.nz)
        )
        return (lap / self.h**2).tocsc()


@dataclass
class GridModel2D:
    """Squared-slowness field ``m`` (s^2/m^2) on ``grid``."""

    grid: Grid
    m: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        self.m = m.ravel(order="F") if m.ndim == 2 else m
        if self.m.size != self.grid.size:
            raise ValueError(f"model has {self.m.size} entries, grid needs {self.grid.size}")
        if not np.all(np.isfinite(self.m)):
            raise InvalidModelError("model contains non-finite entries", int(np.argmin(np.isfinite(self.m))))
        if np.any(self.m <= 0):
            bad = int(np.argmin(self.m))
            raise InvalidModelError(f"squared slowness must be positive (index {bad})", bad)

    @classmethod
    def from_velocity(cls, grid, v):
        v = np.asarray(v, dtype=float)
        if v.ndim == 2:
            v = v.ravel(order="F")
        return cls(grid, 1.0 / v**2)

    def as_image(self):
        return self.m.reshape(self.grid.shape, order="F")


@dataclass
class AcquisitionGeometry:
    """Sources, receivers (grid indices ``(iz, ix)``) and angular frequencies.

    ``weights`` is the ``n_grid x n_src`` source matrix ``Q``; when omitted
    each source is a unit point mass scaled by ``1/h^2``.
    """

    sources: np.ndarray
    receivers: np.ndarray
    omegas: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        self.sources = np.atleast_2d(np.asarray(self.sources, dtype=int))
        self.receivers = np.atleast_2d(np.asarray(self.receivers, dtype=int))
        self.omegas = np.atleast_1d(np.asarray(self.omegas, dtype=float))
        if self.sources.shape[1] != 2 or self.receivers.shape[1] != 2:
            raise ValueError("sources and receivers are (iz, ix) index pairs")
        if len(self.sources) == 0 or len(self.receivers) == 0:
            raise ValueError("need at least one source and one receiver")
        if len(self.omegas) == 0 or np.any(self.omegas <= 0):
            raise ValueError("frequencies must be > 0")

    @property
    def n_src(self):
        return len(self.sources)

    @property
    def n_recv(self):
        return len(self.receivers)

    def validate(self, grid):
        for name, pts in (("source", self.sources), ("receiver", self.receivers)):
            if not np.all(grid.is_interior(pts[:, 0], pts[:, 1])):
                raise ValueError(f"{name} positions must lie inside the grid interior, outside the sponge")
        if self.weights is not None and np.shape(self.weights) != (grid.size, self.n_src):
            raise ValueError("source weight matrix must be n_grid x n_src")

    def source_matrix(self, grid):
        if self.weights is not None:
            return np.asarray(self.weights, dtype=complex)
        q = np.zeros((grid.size, self.n_src), dtype=complex)
        q[grid.index(self.sources[:, 0], self.sources[:, 1]), np.arange(self.n_src)] = 1.0 / grid.h**2
        return q

    def sampling(self, grid):
        """Sparse nearest-node sampling operator ``S`` (n_recv x n_grid)."""
        cols = grid.index(self.receivers[:, 0], self.receivers[:, 1])
        rows = np.arange(self.n_recv)
        return sp.csr_matrix((np.ones(self.n_recv), (rows, cols)), shape=(self.n_recv, grid.size))


@dataclass
class FrequencyData:
    """Complex data cube ``values[w]`` of shape ``(n_recv, n_src)`` per frequency."""

    omegas: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.omegas = np.atleast_1d(np.asarray(self.omegas, dtype=float))
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.ndim != 3 or self.values.shape[0] != len(self.omegas):
            raise ValueError("data must be shaped (n_omega, n_recv, n_src)")

    @property
    def n_recv(self):
        return self.values.shape[1]

    @property
    def n_src(self):
        return self.values.shape[2]

    def copy(self):
        return FrequencyData(self.omegas.copy(), self.values.copy())


def assemble(model, omega):
    """Sparse Helmholtz matrix for ``model`` at angular frequency ``omega``.

    ``omega = 0`` returns the bare Laplacian.
    """
    if not (np.isfinite(omega) and omega >= 0):
        raise ValueError(f"angular frequency must be >= 0, got {omega}")
    grid = model.grid
    if omega > 0:
        vmin = 1.0 / np.sqrt(model.m.max())
        ppw = 2 * np.pi * vmin / (omega * grid.h)
        if ppw < MIN_POINTS_PER_WAVELENGTH:
            warnings.warn(
                f"omega={omega:g}: {ppw:.1f} points per wavelength (< {MIN_POINTS_PER_WAVELENGTH})",
                stacklevel=2,
            )
    mc = model.m * (1.0 - 1j * grid.damping())
    return (grid.laplacian() + sp.diags(omega**2 * mc)).tocsc()


class FactorizedOperator:
    """Sparse LU of ``H(m, omega)``, reused for every source and adjoint solve.

    Immutable after construction apart from the ``n_solves`` counter, which
    counts right-hand-side columns solved.
    """

    def __init__(self, H, omega):
        self.omega = float(omega)
        self.H = H.tocsc()
        try:
            self._lu = spla.splu(self.H)
        except RuntimeError as exc:
            raise NumericalFailure(f"factorization failed at omega={omega:g}: {exc}", omega) from exc
        d = np.abs(self._lu.U.diagonal())
        if d.min() == 0 or d.max() / d.min() > COND_LIMIT:
            raise NumericalFailure(f"Helmholtz matrix is near-singular at omega={omega:g}", omega)
        self.n_solves = 0

    def solve(self, b, adjoint=False):
        b = np.asarray(b, dtype=complex)
        trans = "H" if adjoint else "N"
        A = self.H.conj().T if adjoint else self.H
        u = self._lu.solve(b, trans=trans)
        r = A @ u - b
        bnorm = np.linalg.norm(b, axis=0)
        rnorm = np.linalg.norm(r, axis=0)
        if np.any(rnorm > SOLVE_RTOL * bnorm):
            u = u - self._lu.solve(r, trans=trans)
            rnorm = np.linalg.norm(A @ u - b, axis=0)
            if np.any(rnorm > SOLVE_RTOL * bnorm):
                worst = float(np.max(rnorm / np.where(bnorm > 0, bnorm, 1.0)))
                raise NumericalFailure(
                    f"solve residual {worst:.2e} exceeds {SOLVE_RTOL:g} at omega={self.omega:g}",
                    self.omega,
                )
        self.n_solves += 1 if b.ndim == 1 else b.shape[1]
        return u


def factorize(model, omega):
    return FactorizedOperator(assemble(model, omega), omega)


def solve(op, q):
    """Wavefield(s) ``u = H^{-1} q`` for one or several source columns."""
    return op.solve(q)


def _map_frequencies(fn, omegas, threads):
    if threads is None or threads <= 1 or len(omegas) == 1:
        return [fn(w) for w in omegas]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, omegas))


def predict_data(model, geom, threads=1):
    """``D[w] = S H(m, w)^{-1} Q`` for every frequency of ``geom``."""
    grid = model.grid
    Q = geom.source_matrix(grid)
    S = geom.sampling(grid)

    def one(w):
        return S @ factorize(model, w).solve(Q)

    return FrequencyData(geom.omegas, np.stack(_map_frequencies(one, geom.omegas, threads)))


class MisfitResult(NamedTuple):
    value: float
    gradient: np.ndarray
    ls_residual: float
    n_solves: int


def misfit_and_gradient(model, geom, data, penalty, weights=None, threads=1):
    """Misfit ``sum_w weight_w * rho(S H^{-1} Q - D_w)`` and its adjoint-state gradient in ``m``.

    Per frequency one factorization serves the forward solves ``u = H^{-1} Q``
    and the adjoint solves ``v = H^{-H} S^T G`` with ``G = grad rho``. The
    gradient is ``-Re(omega^2 (1 - i gamma) conj(v) u)`` summed over sources
    and frequencies.
    """
    grid = model.grid
    if data.values.shape[1:] != (geom.n_recv, geom.n_src):
        raise ValueError("data shape does not match the acquisition geometry")
    if not np.allclose(data.omegas, geom.omegas):
        raise ValueError("data and geometry frequencies differ")
    w_freq = np.ones(len(geom.omegas)) if weights is None else np.asarray(weights, dtype=float)
    Q = geom.source_matrix(grid)
    S = geom.sampling(grid)
    dmp = 1.0 - 1j * grid.damping()
    ls = LeastSquares()

    def one(k):
        w = geom.omegas[k]
        op = factorize(model, w)
        U = op.solve(Q)
        r = S @ U - data.values[k]
        G = penalty.gradient(r)
        V = op.solve(S.T @ G, adjoint=True)
        g = -np.real(w**2 * dmp[:, None] * np.conj(V) * U).sum(axis=1)
        return penalty.value(r), g, ls.value(r), op.n_solves

    parts = _map_frequencies(one, range(len(geom.omegas)), threads)
    value = float(sum(wk * p[0] for wk, p in zip(w_freq, parts)))
    grad = np.zeros(grid.size)
    for wk, p in zip(w_freq, parts):
        grad += wk * p[1]
    ls_res = float(sum(p[2] for p in parts))
    return MisfitResult(value, grad, ls_res, int(sum(p[3] for p in parts)))


def misfit_gradient(model, geom, data, penalty, weights=None, threads=1):
    return misfit_and_gradient(model, geom, data, penalty, weights, threads).gradient
