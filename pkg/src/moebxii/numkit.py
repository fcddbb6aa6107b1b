"""Small numerics kernel: unit-interval quadrature, 3x3 linear algebra and
a restarted Nelder-Mead wrapper."""
from __future__ import annotations

import os
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize as _scipy_minimize
from scipy.special import expit

__all__ = [
    "QuadratureConfig",
    "OptimConfig",
    "QuadratureError",
    "SingularMatrixError",
    "NotPositiveDefiniteError",
    "minimize",
    "invert3",
    "sqrt_spd",
    "inv_sqrt_spd",
    "integrate01",
    "integrate_logistic",
    "logistic_rule",
    "anderson_mix",
    "LOGIT_BOUND",
]

# Half-width of the truncated logit domain; the neglected mass is
# 2*expit(-40) ~ 8e-18.
LOGIT_BOUND = 40.0
_PANEL_ORDER = 8
_GRADING = 3.0


class QuadratureError(ArithmeticError):
    """Coarse and refined quadrature results disagree beyond tolerance."""


class SingularMatrixError(np.linalg.LinAlgError):
    pass


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class QuadratureConfig:
    nodes: int = 256
    refine_factor: int = 2
    tol: float = 1e-8

    def __post_init__(self):
        if int(self.nodes) < 16:
            raise ValueError("nodes must be >= 16")
        if int(self.refine_factor) < 2:
            raise ValueError("refine_factor must be >= 2")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")

    @classmethod
    def from_env(cls, **overrides) -> "QuadratureConfig":
        """Default config with ``MOEBXII_QUAD_NODES`` applied, if set."""
        env = os.environ.get("MOEBXII_QUAD_NODES")
        if env and "nodes" not in overrides:
            overrides["nodes"] = int(env)
        return cls(**overrides)

    def refined(self) -> "QuadratureConfig":
        return QuadratureConfig(self.nodes * self.refine_factor, self.refine_factor, self.tol)


@dataclass(frozen=True)
class OptimConfig:
    max_iter: int = 2000
    f_tol: float = 1e-10
    x_tol: float = 1e-8
    restarts: int = 2

    def __post_init__(self):
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be positive")
        if not (self.f_tol > 0 and self.x_tol > 0):
            raise ValueError("tolerances must be > 0")
        if int(self.restarts) < 0:
            raise ValueError("restarts must be >= 0")


# ---------------------------------------------------------------------------
# quadrature

@lru_cache(maxsize=64)
def _gauss_legendre(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _composite(edges: np.ndarray, order: int):
    x, w = _gauss_legendre(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def integrate01(g: Callable[[np.ndarray], np.ndarray], cfg: QuadratureConfig | None = None,
                panels: int = 1):
    """Gauss-Legendre integral of ``g`` over (0, 1).

    ``g`` is called once with the vector of nodes and must return an array
    whose leading axis runs over the nodes.  With the default single panel
    the rule is exact for polynomials of degree ``2*cfg.nodes - 1``.  The
    result at ``cfg.nodes`` is checked against the refined node count.
    """
    cfg = cfg or QuadratureConfig()

    def rule(n):
        order = max(1, n // panels)
        u, w = _composite(np.linspace(0.0, 1.0, panels + 1), order)
        vals = np.asarray(g(u), dtype=float)
        return np.tensordot(w, vals, axes=(0, 0))

    coarse = rule(cfg.nodes)
    fine = rule(cfg.nodes * cfg.refine_factor)
    _check_refinement(coarse, fine, cfg.tol)
    return fine


def logistic_rule(nodes: int, breaks: Sequence[float] = ()):
    """Composite Gauss-Legendre rule on ``z = logit(u)``.

    Returns ``(z, w)`` such that ``sum(w * g(expit(z)))`` approximates
    ``int_0^1 g(u) du``; the Jacobian ``u(1-u)`` is folded into ``w``.
    The logit range is truncated to ``[-LOGIT_BOUND, LOGIT_BOUND]`` and cut
    into panels of eight nodes, narrow near ``z = 0`` and widening
    sinh-wise into the tails where integrands are close to exponential.
    Extra ``breaks`` (in z) split panels so that integrands with kinks stay
    piecewise smooth.
    """
    n_panels = max(2, int(round(nodes / _PANEL_ORDER)))
    t = np.linspace(-1.0, 1.0, n_panels + 1)
    edges = LOGIT_BOUND * np.sinh(_GRADING * t) / np.sinh(_GRADING)
    if len(breaks):
        extra = np.asarray(breaks, dtype=float)
        extra = extra[(extra > -LOGIT_BOUND) & (extra < LOGIT_BOUND)]
        edges = np.unique(np.concatenate([edges, extra]))
    z, w = _composite(edges, _PANEL_ORDER)
    return z, w * expit(z) * expit(-z)


def integrate_logistic(f: Callable[[np.ndarray, np.ndarray], np.ndarray],
                       cfg: QuadratureConfig | None = None, breaks: Sequence[float] = (),
                       check: bool = True):
    """Integrate over u in (0, 1) through the logit substitution.

    ``f(z, w)`` receives the nodes and weights of :func:`logistic_rule` and
    returns the weighted sum it needs (this lets callers contract outer
    products without materialising per-node matrices).  With ``check``
    the refined rule is also evaluated and the refined value returned.
    """
    cfg = cfg or QuadratureConfig()
    coarse = np.asarray(f(*logistic_rule(cfg.nodes, breaks)), dtype=float)
    if not check:
        return coarse
    fine = np.asarray(f(*logistic_rule(cfg.nodes * cfg.refine_factor, breaks)), dtype=float)
    _check_refinement(coarse, fine, cfg.tol)
    return fine


def _check_refinement(coarse, fine, tol):
    scale = max(1.0, float(np.max(np.abs(fine))))
    err = float(np.max(np.abs(fine - coarse)))
    if not np.isfinite(err) or err > tol * scale:
        raise QuadratureError(f"quadrature did not converge: refinement changed the result by {err:.3e}")


# ---------------------------------------------------------------------------
# 3x3 linear algebra

def invert3(m) -> np.ndarray:
    m = np.asarray(m, dtype=float).reshape(3, 3)
    if not np.all(np.isfinite(m)):
        raise SingularMatrixError("matrix has non-finite entries")
    norm = np.max(np.abs(m))
    det = np.linalg.det(m)
    if not np.isfinite(det) or abs(det) <= 1e-14 * norm ** 3:
        raise SingularMatrixError(f"matrix is singular (det={det:.3e})")
    return np.linalg.inv(m)


def sqrt_spd(m) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == m`` (Cholesky factor)."""
    m = np.asarray(m, dtype=float).reshape(3, 3)
    try:
        return np.linalg.cholesky(0.5 * (m + m.T))
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("matrix is not positive definite") from exc


def inv_sqrt_spd(m) -> np.ndarray:
    """Lower-triangular ``A`` with ``A.T @ A == inv(m)``.

    ``A`` is the inverse of the Cholesky factor of ``m``; only ``A.T @ A``
    matters wherever ``A`` enters through ``||A v||``.
    """
    L = sqrt_spd(m)
    return invert3(L)


# ---------------------------------------------------------------------------
# fixed-point acceleration

def anderson_mix(xs: Sequence[np.ndarray], gs: Sequence[np.ndarray]) -> np.ndarray:
    """Anderson-mixed next iterate of the fixed-point map ``x -> g(x)``.

    ``xs`` and ``gs`` hold recent iterates and their images, oldest first.
    Residuals are scaled by the latest image so coordinates of very
    different magnitude weigh equally in the least-squares mixing.  With
    fewer than two pairs this is the plain update ``gs[-1]``.
    """
    g = np.asarray(gs[-1], dtype=float)
    if len(xs) < 2:
        return g
    scale = 1.0 / np.maximum(np.abs(g), 1e-12)
    F = np.array([(np.asarray(gi) - np.asarray(xi)) * scale for xi, gi in zip(xs, gs)])
    dF = np.diff(F, axis=0)
    dG = np.diff(np.asarray(gs, dtype=float), axis=0)
    gamma, *_ = np.linalg.lstsq(dF.T, F[-1], rcond=None)
    x = g - gamma @ dG
    return x if np.all(np.isfinite(x)) else g


# ---------------------------------------------------------------------------
# minimisation

def minimize(f: Callable[[np.ndarray], float], x0, cfg: OptimConfig | None = None,
             step: float = 0.5):
    """Nelder-Mead with restarts around the incumbent.

    Returns ``(x, converged)``.  Each restart rebuilds the simplex around
    the best point found so far with a step shrinking by 10x; the run is
    declared converged when a restart fails to improve the objective by
    more than ``cfg.f_tol``.  Non-convergence is reported, never raised.
    """
    cfg = cfg or OptimConfig()
    x = np.asarray(x0, dtype=float).copy()
    fx = float(f(x))
    if not np.isfinite(fx):
        raise ValueError("objective is not finite at the starting point")
    converged = False
    h = step
    budget = cfg.max_iter
    for attempt in range(cfg.restarts + 1):
        simplex = np.vstack([x, x + h * np.eye(x.size)])
        res = _scipy_minimize(
            f, x, method="Nelder-Mead",
            options=dict(initial_simplex=simplex, xatol=cfg.x_tol, fatol=cfg.f_tol,
                         maxiter=budget, maxfev=4 * budget),
        )
        improved = fx - float(res.fun)
        if res.fun <= fx:
            x, fx = np.asarray(res.x, dtype=float), float(res.fun)
        converged = bool(res.success)
        if converged and attempt > 0 and improved <= cfg.f_tol:
            break
        h *= 0.1
    return x, converged
