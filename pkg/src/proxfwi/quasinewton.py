"""Limited-memory BFGS Hessian approximation and the quadratic model it defines."""

from __future__ import annotations

import logging

import numpy as np
from scipy.linalg import lu_factor, lu_solve

__all__ = ["LbfgsMemory", "update", "hessian_apply", "quadratic_model"]

log = logging.getLogger(__name__)


class LbfgsMemory:
    """Bounded store of curvature pairs ``(s_i, t_i)``.

    Represents the L-BFGS matrix ``B_k`` started from ``B_0 = I / gamma``,
    where ``gamma = <s, t> / <t, t>`` of the newest pair. Products ``B_k d``
    use the compact representation of Byrd, Nocedal & Schnabel (1994)::

        B = sigma*I - W M^{-1} W^T,  W = [sigma*S, T],
        M = [[sigma*S^T S, L], [L^T, -D]],  sigma = 1/gamma,

    with ``L`` the strictly lower triangle and ``D`` the diagonal of ``S^T T``.

    Pairs failing ``<s, t> > curvature_tol * ||s|| ||t||`` are skipped and
    counted in ``n_skipped``, which keeps ``B_k`` positive definite.
    """

    def __init__(self, capacity=10, gamma=1.0, curvature_tol=1e-10):
        if capacity < 1:
            raise ValueError("L-BFGS capacity must be >= 1")
        if not gamma > 0:
            raise ValueError("initial Hessian scaling must be > 0")
        self.capacity = int(capacity)
        self.gamma = float(gamma)
        self.curvature_tol = float(curvature_tol)
        self.s: list[np.ndarray] = []
        self.t: list[np.ndarray] = []
        self.n_skipped = 0
        self._middle = None

    def __len__(self):
        return len(self.s)

    def update(self, s, t):
        """Append ``(s, t)`` if it has enough curvature; return whether it was kept."""
        s = np.asarray(s, dtype=float).copy()
        t = np.asarray(t, dtype=float).copy()
        if s.shape != t.shape or (self.s and s.shape != self.s[0].shape):
            raise ValueError("curvature pair vectors must have matching length")
        st = float(s @ t)
        if not st > self.curvature_tol * np.linalg.norm(s) * np.linalg.norm(t):
            self.n_skipped += 1
            log.debug("skipped curvature pair (<s,t> = %.3e)", st)
            return False
        self.s.append(s)
        self.t.append(t)
        if len(self.s) > self.capacity:
            self.s.pop(0)
            self.t.pop(0)
        self.gamma = st / float(t @ t)
        self._middle = None
        return True

    def _factors(self):
        if self._middle is None:
            S = np.column_stack(self.s)
            T = np.column_stack(self.t)
            sigma = 1.0 / self.gamma
            ST = S.T @ T
            low = np.tril(ST, -1)
            M = np.block([[sigma * (S.T @ S), low], [low.T, -np.diag(np.diag(ST))]])
            self._middle = (S, T, sigma, lu_factor(M))
        return self._middle

    def hessian_apply(self, d):
        d = np.asarray(d, dtype=float)
        if self.s and d.shape != self.s[0].shape:
            raise ValueError("vector length does not match stored pairs")
        if not self.s:
            return d / self.gamma
        S, T, sigma, M_lu = self._factors()
        w = np.concatenate([sigma * (S.T @ d), T.T @ d])
        z = lu_solve(M_lu, w)
        k = S.shape[1]
        return sigma * d - (sigma * (S @ z[:k]) + T @ z[k:])

    def dense(self, n):
        """``B_k`` as a dense ``n x n`` matrix (small problems and tests only)."""
        return np.column_stack([self.hessian_apply(e) for e in np.eye(n)])

    def copy(self):
        other = LbfgsMemory(self.capacity, self.gamma, self.curvature_tol)
        other.s = [v.copy() for v in self.s]
        other.t = [v.copy() for v in self.t]
        other.n_skipped = self.n_skipped
        return other


def update(mem, s, t):
    mem.update(s, t)
    return mem


def hessian_apply(mem, d):
    return mem.hessian_apply(d)


def quadratic_model(mem, y_k, g_k, y, phi_k=0.0):
    """``phi_k + <g_k, y - y_k> + 0.5 <y - y_k, B_k (y - y_k)>``."""
    delta = np.asarray(y, dtype=float) - y_k
    return float(phi_k + g_k @ delta + 0.5 * delta @ mem.hessian_apply(delta))
