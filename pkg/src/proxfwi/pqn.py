"""Proximal quasi-Newton minimization of ``f(y) + R(y)``.

The outer loop builds an L-BFGS model ``Q`` of the smooth part ``f`` and
approximately minimizes ``Q + R`` with a spectral (Barzilai-Borwein)
proximal-gradient method, then runs a nonmonotone Armijo line search on the
true objective along ``d = y_hat - y_k``. With ``R`` an indicator this is
the projected quasi-Newton method of Schmidt, van den Berg, Friedlander &
Murphy (2009); replacing projections by proxes admits any ``R`` with a
cheap prox (l1 penalties, TV).
"""

from __future__ import annotations

import logging
import time
from collections import deque
from dataclasses import dataclass, field, fields
from typing import NamedTuple

import numpy as np

from .helmholtz import InvalidModelError
from .quasinewton import LbfgsMemory

__all__ = [
    "SolverConfig",
    "IterationRecord",
    "PQNResult",
    "SubproblemInfo",
    "spg_prox_solve",
    "steepest_fallback",
    "prox_grad_norm",
    "minimize",
]

log = logging.getLogger(__name__)


@dataclass
class SolverConfig:
    max_iter: int = 100
    tol: float = 1e-6
    inner_max_iter: int = 100
    inner_tol: float = 1e-8
    nonmonotone_window: int = 10
    armijo: float = 1e-4
    backtrack: float = 0.5
    step_min: float = 1e-10
    step_max: float = 1e10
    memory: int = 10
    curvature_tol: float = 1e-10
    max_backtracks: int = 50
    step_tol: float = 1e-12
    initial_gamma: float | None = None

    def __post_init__(self):
        for f in ("max_iter", "inner_max_iter", "nonmonotone_window", "memory", "max_backtracks"):
            if getattr(self, f) < 1:
                raise ValueError(f"{f} must be >= 1")
        for f in ("tol", "inner_tol", "step_min", "step_max", "curvature_tol"):
            if not getattr(self, f) > 0:
                raise ValueError(f"{f} must be > 0")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack must be in (0, 1)")
        if not 0 < self.armijo < 1:
            raise ValueError("armijo must be in (0, 1)")
        if self.step_min > self.step_max:
            raise ValueError("step_min must not exceed step_max")
        if self.initial_gamma is not None and not self.initial_gamma > 0:
            raise ValueError("initial_gamma must be > 0")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown solver option(s): {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class IterationRecord:
    iter: int
    phi: float
    misfit: float
    reg: float
    ls_residual: float
    prox_grad_norm: float
    step: float
    inner_iters: int
    pde_solves: int
    wall_ms: float


@dataclass
class PQNResult:
    y: np.ndarray
    trace: list[IterationRecord]
    status: str
    best_phi: float
    n_skipped_pairs: int = 0
    n_fallbacks: int = 0
    messages: list[str] = field(default_factory=list)

    @property
    def converged(self):
        return self.status == "converged"

    @property
    def degraded(self):
        return self.status == "line_search_failed"

    def __iter__(self):
        # unpack as (y, trace)
        return iter((self.y, self.trace))


class SubproblemInfo(NamedTuple):
    n_iter: int
    model_value: float
    start_value: float


def prox_grad_norm(y, g, reg, t=1.0):
    """``||y - prox_{tR}(y - t g)|| / t``; zero exactly at stationary points."""
    return float(np.linalg.norm(y - reg.prox(y - t * g, t)) / t)


def steepest_fallback(y_k, g_k, reg, gamma=1.0):
    """Proximal-gradient direction ``prox_{gamma R}(y_k - gamma g_k) - y_k``."""
    return reg.prox(y_k - gamma * g_k, gamma) - y_k


def spg_prox_solve(mem, y_k, g_k, reg, cfg=None, full_output=False):
    """Approximately minimize ``Q(y) + R(y)`` by spectral proximal gradient.

    ``Q(y) = <g_k, y - y_k> + 0.5 <y - y_k, B_k (y - y_k)>`` with ``B_k``
    from ``mem``. Iterates ``z+ = prox_{aR}(z - a grad Q(z))`` with
    Barzilai-Borwein steps ``a`` (clipped to ``[step_min, step_max]``) and a
    nonmonotone acceptance test over the last ``nonmonotone_window`` values.
    Stops when ``||z+ - z|| / a <= inner_tol`` or after ``inner_max_iter``
    iterations. The best point visited is returned, so the model value
    never exceeds its value at ``y_k``.
    """
    cfg = cfg or SolverConfig()
    y_k = np.asarray(y_k, dtype=float)
    g_k = np.asarray(g_k, dtype=float)
    z = y_k.copy()
    grad = g_k.copy()
    q = 0.0
    r = reg.value(z)
    if not np.isfinite(r):
        raise ValueError("subproblem start point is infeasible for the regularizer")
    start = q + r
    best_f, best_z = start, z
    hist = deque([start], maxlen=cfg.nonmonotone_window)
    alpha = float(np.clip(mem.gamma, cfg.step_min, cfg.step_max))
    n_iter = 0
    for n_iter in range(1, cfg.inner_max_iter + 1):
        z_trial = reg.prox(z - alpha * grad, alpha)
        d = z_trial - z
        if np.linalg.norm(d) / alpha <= cfg.inner_tol:
            break
        Bd = mem.hessian_apply(d)
        gd = float(grad @ d)
        dBd = float(d @ Bd)
        r_trial = reg.value(z_trial)
        delta = gd + r_trial - r
        ref = max(hist)
        lam = 1.0
        for _ in range(cfg.max_backtracks):
            q_new = q + lam * gd + 0.5 * lam**2 * dBd
            r_new = r_trial if lam == 1.0 else reg.value(z + lam * d)
            if q_new + r_new <= ref + cfg.armijo * lam * delta:
                break
            lam *= cfg.backtrack
        if not np.isfinite(q_new + r_new):
            raise FloatingPointError("subproblem diverged (non-finite model value)")
        z = z_trial if lam == 1.0 else z + lam * d
        q, r = q_new, r_new
        grad = grad + lam * Bd
        hist.append(q + r)
        if q + r < best_f:
            best_f, best_z = q + r, z
        sty = lam**2 * dBd
        if sty <= 0:
            alpha = cfg.step_max
        else:
            alpha = float(np.clip(lam**2 * float(d @ d) / sty, cfg.step_min, cfg.step_max))
    if full_output:
        return best_z, SubproblemInfo(n_iter, best_f, start)
    return best_z


def minimize(problem, y0, cfg=None, callback=None):
    """Minimize ``problem.eval_smooth(y).smooth + problem.regularizer(y)``.

    Parameters
    ----------
    problem : CompositeProblem or SmoothProblem
        Anything with ``eval_smooth(y) -> EvalRecord`` and a ``regularizer``.
    y0 : ndarray
        Starting coefficients. Infeasible starts are mapped through the prox.
    cfg : SolverConfig, optional
    callback : callable, optional
        Called as ``callback(record, y)`` after every accepted iterate.

    Returns
    -------
    PQNResult
        ``y`` is the best iterate found; ``trace`` has one record per outer
        iteration plus the starting point. ``status`` is one of
        ``converged``, ``max_iter``, ``step_collapse`` or
        ``line_search_failed`` (degraded convergence).
    """
    cfg = cfg or SolverConfig()
    reg = problem.regularizer
    t0 = time.perf_counter()
    y = np.asarray(y0, dtype=float).copy()
    if not np.isfinite(reg.value(y)):
        y = reg.prox(y, 1.0)
    rec = problem.eval_smooth(y)
    g = rec.gradient
    pde = rec.pde_solve_count
    gamma0 = cfg.initial_gamma
    if gamma0 is None:
        g1 = float(np.abs(g).sum())
        gamma0 = min(1.0, 1.0 / g1) if g1 > 0 else 1.0
    mem = LbfgsMemory(cfg.memory, gamma0, cfg.curvature_tol)

    pg = prox_grad_norm(y, g, reg)
    pg0 = pg

    def record(k, step, inner):
        return IterationRecord(
            k, rec.total, rec.smooth, rec.reg, rec.ls_residual, pg, step, inner, pde,
            1e3 * (time.perf_counter() - t0),
        )

    trace = [record(0, 0.0, 0)]
    if callback:
        callback(trace[-1], y)
    hist = deque([rec.total], maxlen=cfg.nonmonotone_window)
    best_phi, best_y = rec.total, y.copy()
    n_fallbacks = 0
    status = "max_iter"
    messages = []

    if pg == 0.0:
        status = "converged"
    for k in range(1, cfg.max_iter + 1):
        if status != "max_iter":
            break
        y_hat, info = spg_prox_solve(mem, y, g, reg, cfg, full_output=True)
        d = y_hat - y
        delta = float(g @ d) + reg.value(y_hat) - rec.reg
        if not delta < 0:
            d = steepest_fallback(y, g, reg, mem.gamma)
            delta = float(g @ d) + reg.value(y + d) - rec.reg
            n_fallbacks += 1
            if not delta < 0:
                # stationary up to rounding, but not certified by the tolerance test
                status = "step_collapse"
                messages.append(f"iteration {k}: no descent direction at prox-gradient norm {pg:.3e}")
                break
        ref = max(hist)
        eta = 1.0
        accepted = None
        for _ in range(cfg.max_backtracks + 1):
            trial = y + eta * d
            try:
                new = problem.eval_smooth(trial)
            except InvalidModelError as exc:
                log.debug("backtracking from invalid model: %s", exc)
            else:
                pde += new.pde_solve_count
                if new.total <= ref + cfg.armijo * eta * delta:
                    accepted = new
                    break
            eta *= cfg.backtrack
        if accepted is None:
            status = "line_search_failed"
            messages.append(f"iteration {k}: line search failed after {cfg.max_backtracks} backtracks")
            break
        s = trial - y
        mem.update(s, accepted.gradient - g)
        y, rec, g = trial, accepted, accepted.gradient
        hist.append(rec.total)
        pg = prox_grad_norm(y, g, reg)
        trace.append(record(k, eta, info.n_iter))
        if callback:
            callback(trace[-1], y)
        if rec.total < best_phi:
            best_phi, best_y = rec.total, y.copy()
        if pg <= cfg.tol * pg0:
            status = "converged"
        elif np.linalg.norm(s) <= cfg.step_tol * (1.0 + np.linalg.norm(y)):
            status = "step_collapse"
    log.info("PQN finished: %s after %d iterations, phi=%.6e", status, len(trace) - 1, best_phi)
    return PQNResult(best_y, trace, status, best_phi, mem.n_skipped, n_fallbacks, messages)
