"""Linear maps ``m = C y`` between optimization coefficients and the model grid.

Vectors are flat and z-fastest (column-major on an ``(nz, nx)`` grid),
matching the model file layout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Identity", "HaarWavelet2D", "apply", "adjoint", "make_transform"]

_R2 = np.sqrt(0.5)


@dataclass(frozen=True)
class Identity:
    def apply(self, y):
        return np.asarray(y, dtype=float).copy()

    def adjoint(self, m):
        return np.asarray(m, dtype=float).copy()


def _haar_fwd_axis(a, axis):
    a = np.moveaxis(a, axis, 0)
    lo = (a[0::2] + a[1::2]) * _R2
    hi = (a[0::2] - a[1::2]) * _R2
    return np.moveaxis(np.concatenate([lo, hi], axis=0), 0, axis)


def _haar_inv_axis(a, axis):
    a = np.moveaxis(a, axis, 0)
    half = a.shape[0] // 2
    lo, hi = a[:half], a[half:]
    out = np.empty_like(a)
    out[0::2] = (lo + hi) * _R2
    out[1::2] = (lo - hi) * _R2
    return np.moveaxis(out, 0, axis)


@dataclass(frozen=True)
class HaarWavelet2D:
    """Orthonormal multilevel 2-D Haar transform on an ``(nz, nx)`` grid.

    Coefficients use the Mallat layout: after ``levels`` splits the
    scaling (approximation) block occupies the top-left
    ``(nz >> levels, nx >> levels)`` corner. ``apply`` is synthesis
    (coefficients to model), ``adjoint`` is analysis; being orthonormal,
    each is the inverse of the other.
    """

    shape: tuple[int, int]
    levels: int = 1

    def __post_init__(self):
        shape = tuple(int(s) for s in self.shape)
        object.__setattr__(self, "shape", shape)
        if self.levels < 1:
            raise ValueError("Haar transform needs levels >= 1")
        block = 1 << self.levels
        if any(s % block for s in shape):
            raise ValueError(f"grid {shape} is not divisible by 2**{self.levels}")

    def _grid(self, v):
        v = np.asarray(v, dtype=float)
        nz, nx = self.shape
        if v.size != nz * nx:
            raise ValueError(f"vector of length {v.size} does not match grid {self.shape}")
        return v.reshape(self.shape, order="F")

    def adjoint(self, m):
        c = self._grid(m).copy()
        nz, nx = self.shape
        for _ in range(self.levels):
            blk = c[:nz, :nx]
            c[:nz, :nx] = _haar_fwd_axis(_haar_fwd_axis(blk, 0), 1)
            nz //= 2
            nx //= 2
        return c.ravel(order="F")

    def apply(self, y):
        c = self._grid(y).copy()
        nz, nx = self.shape
        sizes = [(nz >> k, nx >> k) for k in range(self.levels)]
        for bz, bx in reversed(sizes):
            blk = c[:bz, :bx]
            c[:bz, :bx] = _haar_inv_axis(_haar_inv_axis(blk, 1), 0)
        return c.ravel(order="F")


def apply(kind, y):
    return kind.apply(y)


def adjoint(kind, m):
    return kind.adjoint(m)


def make_transform(spec: dict, shape):
    name = spec.get("kind", "identity").lower()
    if name == "identity":
        return Identity()
    if name in ("haar", "haar2d", "haarwavelet2d"):
        return HaarWavelet2D(tuple(shape), int(spec.get("levels", 1)))
    raise ValueError(f"unknown transform kind {spec.get('kind')!r}")
