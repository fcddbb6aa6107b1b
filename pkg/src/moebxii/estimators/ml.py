"""Maximum likelihood."""
from __future__ import annotations

import numpy as np

from .._backend import kernels
from ..dist import Params
from ..numkit import OptimConfig, minimize
from ._common import EstimationResult, Method, as_sample, positive_log_values


def neg_loglik(eta: np.ndarray, lx: np.ndarray) -> float:
    """Negative log-likelihood at log-parameters ``eta``."""
    alpha, c, k = np.exp(eta)
    val = -kernels.loglik(alpha, c, k, lx)
    return val if np.isfinite(val) else np.inf


def score_sums(p: Params, sample) -> np.ndarray:
    """Summed score (the three likelihood equations) at ``p``."""
    lx = positive_log_values(as_sample(sample), min_n=1)
    return kernels.scores(p.alpha, p.c, p.k, lx).sum(axis=0)


def fit_ml(s, cfg: OptimConfig | None = None, init: Params | None = None) -> EstimationResult:
    """Maximise the log-likelihood by simplex search in log-parameter space.

    Starts from ``init`` (default ``(1, 1, 1)``).  ``iterations`` counts
    objective evaluations and ``objective`` is the maximised log-likelihood.
    """
    cfg = cfg or OptimConfig()
    lx = positive_log_values(as_sample(s))
    eta0 = np.log(init.as_array()) if init is not None else np.zeros(3)
    evals = 0

    def f(eta):
        nonlocal evals
        evals += 1
        return neg_loglik(eta, lx)

    eta, converged = minimize(f, eta0, cfg)
    p = Params.from_array(np.exp(eta))
    return EstimationResult(p, Method.ML, converged, evals, kernels.loglik(p.alpha, p.c, p.k, lx))
