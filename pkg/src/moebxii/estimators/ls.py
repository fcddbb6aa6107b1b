"""Least squares on the log-survival scale."""
from __future__ import annotations

import numpy as np

from .._backend import kernels
from ..dist import Params
from ..numkit import OptimConfig, minimize
from ._common import EstimationResult, Method, TransformedSample, as_sample, positive_log_values


def ls_objective(p: Params, ts: TransformedSample) -> float:
    """``sum (y_(i) - u_(i))**2``."""
    return kernels.ls_objective(p.alpha, p.c, p.k, ts.log_x, ts.y)


def model_gradient(p: Params, lx: np.ndarray) -> np.ndarray:
    """Partial derivatives of ``u = -log S(x)`` in ``(alpha, c, k)``, shape ``(n, 3)``.

    ``du/dalpha = -(1 - t)/(alpha h)``, ``du/dc = k x^c log(x) / ((1 + x^c) h)``
    and ``du/dk = log(1 + x^c) / h``.
    """
    alpha, c, k = p
    cl = c * lx
    L = np.logaddexp(0.0, cl)
    t = np.exp(-k * L)
    h = 1.0 - (1.0 - alpha) * t
    e = np.exp(cl - L)
    return np.stack([np.expm1(-k * L) / (alpha * h), k * e * lx / h, L / h], axis=-1)


def normal_equations(p: Params, ts: TransformedSample) -> np.ndarray:
    """``sum (y - u) du/dtheta``; zero at an interior LS optimum."""
    lx = ts.log_x
    r = kernels.log_survival_residuals(p.alpha, p.c, p.k, lx, ts.y)
    return r @ model_gradient(p, lx)


def fit_ls(s, cfg: OptimConfig | None = None, init: Params | None = None) -> EstimationResult:
    """Minimise the squared log-survival residuals directly.

    The search runs in log-parameter space from ``init`` (default
    ``(1, 1, 1)``); ``objective`` is the final sum of squares.
    """
    cfg = cfg or OptimConfig()
    s = as_sample(s)
    positive_log_values(s)
    ts = TransformedSample.from_sample(s)
    lx, y = ts.log_x, ts.y
    evals = 0

    def f(eta):
        nonlocal evals
        evals += 1
        alpha, c, k = np.exp(eta)
        val = kernels.ls_objective(alpha, c, k, lx, y)
        return val if np.isfinite(val) else np.inf

    eta0 = np.log(init.as_array()) if init is not None else np.zeros(3)
    eta, converged = minimize(f, eta0, cfg)
    p = Params.from_array(np.exp(eta))
    return EstimationResult(p, Method.LS, converged, evals, ls_objective(p, ts))
