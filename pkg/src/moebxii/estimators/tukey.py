"""M-estimation with Tukey's biweight on the log-survival residuals.

Each sweep freezes the weights, then updates ``k`` in closed form, ``c`` by
a bracketed root search and ``log alpha`` as a weighted average.  Steps are
accepted only if they do not increase the biweight objective.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .._backend import kernels
from ..dist import Params
from ..numkit import anderson_mix
from ._common import (EstimationError, EstimationResult, Method, TransformedSample, as_sample,
                      positive_log_values)
from .ls import fit_ls

log = logging.getLogger(__name__)

_MAX_BACKTRACK = 10
_MAX_EXPAND = 8
_DEPTH = 5


@dataclass(frozen=True)
class MEstConfig:
    b: float = 1.345
    max_iter: int = 500
    tol: float = 1e-8

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError("tuning constant b must be > 0")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")


def tukey_weights(r, b):
    """``(1 - (r/b)^2)^2`` inside ``|r| <= b``, zero outside."""
    r = np.asarray(r, dtype=float)
    z = 1.0 - (r / b) ** 2
    return np.where(np.abs(r) <= b, z * z, 0.0)


def tukey_rho(r, b):
    """Biweight loss whose ``psi(r)/r`` is :func:`tukey_weights`.

    ``b^2/6 * (1 - (1 - (r/b)^2)^3)`` inside the cutoff, ``b^2/6`` beyond.
    """
    r = np.asarray(r, dtype=float)
    z = np.clip(1.0 - (r / b) ** 2, 0.0, None)
    return (b * b / 6.0) * (1.0 - z ** 3)


def _pieces(alpha, c, k, lx):
    cl = c * lx
    L = np.logaddexp(0.0, cl)
    t = np.exp(-k * L)
    h = 1.0 - (1.0 - alpha) * t
    return cl, L, t, h


def _update_k(alpha, c, k, lx, y, w):
    _, L, _, h = _pieces(alpha, c, k, lx)
    den = np.sum(w * L * L / h)
    num = np.sum(w * (y + np.log(alpha) - np.log(h)) * L / h)
    k_new = num / den if den > 0 else np.nan
    return k_new if np.isfinite(k_new) and k_new > 0 else k


def _c_equation(log_c, alpha, k, lx, y, w):
    c = np.exp(log_c)
    cl, L, t, h = _pieces(alpha, c, k, lx)
    r = y - (k * L - np.log(alpha) + np.log(h))
    du_dc = k * np.exp(cl - L) * lx / h
    return float(np.sum(w * r * du_dc))


def _update_c(alpha, c, k, lx, y, w):
    lc = np.log(c)
    args = (alpha, k, lx, y, w)
    for widen in range(4):
        half = 2.0 * (widen + 1)
        lo, hi = lc - half, lc + half
        f_lo, f_hi = _c_equation(lo, *args), _c_equation(hi, *args)
        if np.isfinite(f_lo) and np.isfinite(f_hi) and f_lo * f_hi <= 0.0:
            return float(np.exp(brentq(_c_equation, lo, hi, args=args, xtol=1e-14, rtol=1e-14)))
    log.debug("no sign change for the c equation around c=%g; keeping it", c)
    return c


def _update_alpha(alpha, c, k, lx, y, w):
    _, L, t, h = _pieces(alpha, c, k, lx)
    g = -np.expm1(-k * L) / (alpha * h)
    den = np.sum(w * g)
    if not den > 0:
        return alpha
    log_alpha = np.sum(w * g * (k * L + np.log(h) - y)) / den
    return float(np.exp(log_alpha)) if np.isfinite(log_alpha) else alpha


def tukey_objective(p: Params, ts: TransformedSample, b: float) -> float:
    r = kernels.log_survival_residuals(p.alpha, p.c, p.k, ts.log_x, ts.y)
    return float(np.sum(tukey_rho(r, b)))


def _sweep(theta, lx, y, b):
    """One reweighting sweep: fresh weights, then ``k``, ``c`` and ``alpha`` in turn."""
    alpha, c, k = theta
    w = tukey_weights(kernels.log_survival_residuals(alpha, c, k, lx, y), b)
    if not np.any(w > 0):
        raise EstimationError(f"all Tukey weights vanished (every |residual| > b={b})")
    k = _update_k(alpha, c, k, lx, y, w)
    c = _update_c(alpha, c, k, lx, y, w)
    alpha = _update_alpha(alpha, c, k, lx, y, w)
    return np.array([alpha, c, k])


def fit_m_tukey(s, cfg: MEstConfig | None = None, init: Params | None = None,
                trace: list | None = None) -> EstimationResult:
    """Tukey-weighted M-estimate by iterative reweighting.

    ``init`` defaults to the least-squares estimate.  Converges when a
    sweep moves no parameter by more than ``cfg.tol``.  Sweeps are
    Anderson-mixed in log-parameter space, and every accepted point
    (mixed, plain or shortened sweep) must not increase the biweight
    objective.  Raises :class:`EstimationError` if every residual falls
    outside ``cfg.b``.  When ``trace`` is a list, the objective after each
    accepted step is appended to it.
    """
    cfg = cfg or MEstConfig()
    s = as_sample(s)
    positive_log_values(s)
    ts = TransformedSample.from_sample(s)
    lx, y, b = ts.log_x, ts.y, cfg.b
    theta = (init or fit_ls(s).params).as_array()
    Q = tukey_objective(Params.from_array(theta), ts, b)
    if trace is not None:
        trace.append(Q)

    def objective(eta):
        return tukey_objective(Params.from_array(np.exp(eta)), ts, b)

    converged = False
    it = 0
    xs, gs = [], []
    for it in range(1, cfg.max_iter + 1):
        proposal = _sweep(theta, lx, y, b)
        if np.max(np.abs(proposal - theta)) < cfg.tol:
            converged = True
            break
        eta = np.log(theta)
        xs.append(eta)
        gs.append(np.log(proposal))
        del xs[:-_DEPTH - 1], gs[:-_DEPTH - 1]

        accepted = None
        if len(xs) > 1:
            mixed = anderson_mix(xs, gs)
            Q_mixed = objective(mixed)
            if Q_mixed <= Q:
                accepted, Q_new = mixed, Q_mixed
        if accepted is None:
            accepted, Q_new = _line_search(objective, eta, gs[-1] - eta, Q)
        if accepted is None:
            # no descent along the sweep: a negligible sweep is a fixed point
            converged = bool(np.max(np.abs(proposal - theta)) < np.sqrt(cfg.tol))
            break
        theta, Q = np.exp(accepted), Q_new
        if trace is not None:
            trace.append(Q)

    return EstimationResult(Params.from_array(theta), Method.M_TUKEY, converged, it, Q)


def _line_search(objective, eta, step, Q):
    """Halve ``step`` until the objective does not increase; if the full
    step already succeeds, keep doubling it while the objective falls.
    Returns ``(eta_new, Q_new)`` or ``(None, Q)``."""
    for halvings in range(_MAX_BACKTRACK + 1):
        Q_new = objective(eta + step)
        if Q_new <= Q:
            break
        step = 0.5 * step
    else:
        return None, Q
    if halvings == 0:
        for _ in range(_MAX_EXPAND):
            Q_try = objective(eta + 2.0 * step)
            if not Q_try < Q_new:
                break
            step, Q_new = 2.0 * step, Q_try
    return eta + step, Q_new
