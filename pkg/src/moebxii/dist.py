"""Marshall-Olkin extended Burr XII distribution.

All kernels are written in terms of ``log x`` so that the heavy right
tail (``x**c`` overflows long before the density is negligible) and the
left edge of the support are both handled without special cases.  The
recurring quantities are::

    L = log(1 + x**c)           # logaddexp(0, c*log x)
    t = (1 + x**c) ** -k        # baseline Burr XII survival
    h = 1 - (1 - alpha) * t     # Marshall-Olkin denominator, always > 0
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import expit, logit

from .numkit import QuadratureConfig, integrate_logistic

__all__ = [
    "DomainError",
    "Params",
    "Sample",
    "pdf",
    "cdf",
    "survival",
    "quantile",
    "sample",
    "log_pdf",
    "score",
    "fisher_information",
    "logx_from_logit",
]


class DomainError(ValueError):
    """An argument lies outside the support or parameter space."""


@dataclass(frozen=True)
class Params:
    """Parameter triple ``(alpha, c, k)``; all three strictly positive."""

    alpha: float
    c: float
    k: float

    def __post_init__(self):
        for name in ("alpha", "c", "k"):
            value = float(getattr(self, name))
            if not (np.isfinite(value) and value > 0.0):
                raise DomainError(f"{name} must be a finite positive number, got {value!r}")
            object.__setattr__(self, name, value)

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha, self.c, self.k])

    @classmethod
    def from_array(cls, theta) -> "Params":
        alpha, c, k = (float(v) for v in theta)
        return cls(alpha, c, k)

    def __iter__(self):
        return iter((self.alpha, self.c, self.k))


class Sample:
    """Non-negative observations, kept in generation order.

    ``values`` is the raw order (outlier injection replaces trailing
    positions, so it matters); ``sorted`` is the order-statistic view.
    """

    def __init__(self, values: Sequence[float]):
        arr = np.array(values, dtype=float).ravel()
        if arr.size < 1:
            raise DomainError("a sample needs at least one observation")
        if not np.all(np.isfinite(arr)):
            raise DomainError("sample contains non-finite values")
        if np.any(arr < 0.0):
            raise DomainError("sample values must be non-negative")
        arr.setflags(write=False)
        self._values = arr
        self._sorted = None

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def sorted(self) -> np.ndarray:
        if self._sorted is None:
            s = np.sort(self._values)
            s.setflags(write=False)
            self._sorted = s
        return self._sorted

    def __len__(self):
        return self._values.size

    def __iter__(self):
        return iter(self._values)

    def __repr__(self):
        return f"Sample(n={len(self)})"


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _ret(arr, scalar):
    return float(arr) if scalar else arr


def _terms(p: Params, lx):
    cl = p.c * lx
    L = np.logaddexp(0.0, cl)
    t = np.exp(-p.k * L)
    h = 1.0 - (1.0 - p.alpha) * t
    return cl, L, t, h


def _baseline_survival(p: Params, x):
    # (1 + x**c) ** -k, finite at x == 0
    with np.errstate(divide="ignore"):
        lx = np.log(x)
    return np.exp(-p.k * np.logaddexp(0.0, p.c * lx))


def _check_support(x, strict=False):
    bad = (x <= 0.0) if strict else (x < 0.0)
    if np.any(bad) or np.any(np.isnan(x)):
        bound = "x > 0" if strict else "x >= 0"
        raise DomainError(f"argument outside the support ({bound} required)")


def log_pdf(p: Params, x):
    """Log density at ``x > 0``."""
    x, scalar = _as_array(x)
    _check_support(x, strict=True)
    lx = np.log(x)
    _, L, t, h = _terms(p, lx)
    out = (np.log(p.alpha * p.c * p.k) + (p.c - 1.0) * lx - (p.k + 1.0) * L
           - 2.0 * np.log1p(-(1.0 - p.alpha) * t))
    return _ret(out, scalar)


def pdf(p: Params, x):
    """Density on ``x >= 0``.

    At ``x == 0`` the density is 0 for ``c > 1`` and ``c*k/alpha`` for
    ``c == 1``; for ``c < 1`` it diverges and a :class:`DomainError` is
    raised.
    """
    x, scalar = _as_array(x)
    _check_support(x)
    at_zero = x == 0.0
    if np.any(at_zero) and p.c < 1.0:
        raise DomainError("density is unbounded at x = 0 when c < 1")
    out = np.empty_like(x)
    pos = ~at_zero
    if np.any(pos):
        out[pos] = np.exp(log_pdf(p, x[pos]))
    out[at_zero] = p.c * p.k / p.alpha if p.c == 1.0 else 0.0
    return _ret(out, scalar)


def survival(p: Params, x):
    """Survival function ``alpha*S0 / (1 - (1-alpha)*S0)`` with Burr XII ``S0``."""
    x, scalar = _as_array(x)
    _check_support(x)
    t = _baseline_survival(p, x)
    out = p.alpha * t / (1.0 - (1.0 - p.alpha) * t)
    return _ret(out, scalar)


def cdf(p: Params, x):
    x, scalar = _as_array(x)
    _check_support(x)
    t = _baseline_survival(p, x)
    # -expm1(-k*L) keeps 1 - t accurate near x = 0
    with np.errstate(divide="ignore"):
        one_minus_t = -np.expm1(-p.k * np.logaddexp(0.0, p.c * np.log(x)))
    out = one_minus_t / (1.0 - (1.0 - p.alpha) * t)
    return _ret(out, scalar)


def logx_from_logit(p: Params, z):
    """``log Q(expit(z))``: log-quantile as a function of the logit of u.

    Solving the cdf for ``t`` gives ``t = 1 / (1 + alpha*exp(z))``, hence
    ``x**c = (1 + alpha*e**z)**(1/k) - 1``.
    """
    z = np.asarray(z, dtype=float)
    L = np.logaddexp(0.0, z + np.log(p.alpha)) / p.k
    # log(expm1(L)) without overflow for large L
    big = L > 30.0
    Ls = np.where(big, 1.0, L)
    with np.errstate(divide="ignore"):
        lxc = np.where(big, L + np.log1p(-np.exp(-L)), np.log(np.expm1(Ls)))
    return lxc / p.c


def quantile(p: Params, u):
    """Inverse cdf on the open interval ``0 < u < 1``."""
    u, scalar = _as_array(u)
    if np.any(~((u > 0.0) & (u < 1.0))):
        raise DomainError("quantile requires 0 < u < 1")
    out = np.exp(logx_from_logit(p, logit(u)))
    return _ret(out, scalar)


def _open_uniforms(rng: np.random.Generator, n: int) -> np.ndarray:
    u = rng.random(n)
    # random() is on [0, 1); zero would map onto the support edge
    while np.any(u == 0.0):
        zero = u == 0.0
        u[zero] = rng.random(int(zero.sum()))
    return u


def sample(p: Params, n: int, seed=None) -> Sample:
    """Draw ``n`` variates by inverse transform.

    ``seed`` may be anything accepted by :func:`numpy.random.default_rng`,
    including an existing Generator (which is then advanced).
    """
    n = int(n)
    if n < 1:
        raise DomainError("n must be >= 1")
    rng = np.random.default_rng(seed)
    return Sample(quantile(p, _open_uniforms(rng, n)))


def score_logx(p: Params, lx) -> np.ndarray:
    """Per-observation gradient of log f in ``(alpha, c, k)`` at ``log x``.

    Returns an array of shape ``lx.shape + (3,)``.
    """
    lx = np.asarray(lx, dtype=float)
    alpha, c, k = p.alpha, p.c, p.k
    cl, L, t, h = _terms(p, lx)
    e = expit(cl)                       # x**c / (1 + x**c)
    abar = 1.0 - alpha
    d_alpha = 1.0 / alpha - 2.0 * t / h
    d_c = 1.0 / c + lx - (k + 1.0) * e * lx - 2.0 * k * abar * e * t * lx / h
    d_k = 1.0 / k - L - 2.0 * abar * t * L / h
    return np.stack([d_alpha, d_c, d_k], axis=-1)


def score(p: Params, x) -> np.ndarray:
    """Score vector(s) ``(d_alpha, d_c, d_k)`` at ``x > 0``."""
    x = np.asarray(x, dtype=float)
    _check_support(x, strict=True)
    return score_logx(p, np.log(x))


def fisher_information(p: Params, quad: QuadratureConfig | None = None) -> np.ndarray:
    """Expected outer product of the score, by quadrature in ``logit(u)``.

    Raises :class:`~moebxii.numkit.QuadratureError` when the result at
    ``quad.nodes`` and at the refined node count disagree by more than
    ``quad.tol`` (relative to the largest entry).
    """
    quad = quad or QuadratureConfig()

    def outer(nodes, weights):
        s = score_logx(p, logx_from_logit(p, nodes))
        return np.einsum("n,ni,nj->ij", weights, s, s)

    J = integrate_logistic(outer, quad)
    return 0.5 * (J + J.T)
