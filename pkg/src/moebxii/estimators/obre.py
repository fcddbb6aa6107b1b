"""Standardized optimal B-robust estimation.

Weights are ``W = min(1, c_B / ||A (s - a)||)``; the scaling matrix ``A``
and centring vector ``a`` are fixed points of

    A^T A = M2^-1,   a = E[W s] / E[W],
    Mj    = E[W^j (s - a)(s - a)^T],

with expectations under the model at the current parameters.  The
parameters then move by ``M1^-1 * mean(W (s - a))`` over the sample.

Model expectations use the logit-substituted quadrature of
:mod:`moebxii.numkit`.  ``W`` has kinks wherever ``||A(s - a)||`` crosses
``c_B``; those points are located first and used as panel breaks so the
rule keeps its accuracy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import root

from .._backend import kernels
from ..dist import Params, fisher_information, logx_from_logit
from ..numkit import QuadratureConfig, anderson_mix, inv_sqrt_spd, invert3, logistic_rule
from ._common import EstimationError, EstimationResult, Method, as_sample, positive_log_values

_MAX_HALVINGS = 10
_STALL_STEP = 0.125
_RESTART_DISTANCES = (0.5, 1.0, 2.0)
# fixed-point residual allowed under the refined rule before nodes are doubled
_REFINED_RESIDUAL = 1e-7
_MAX_NODES = 8192


@dataclass(frozen=True)
class ObreConfig:
    c_B: float = 3.0
    tol: float = 1e-6
    max_outer: int = 200
    max_inner: int = 100
    quad: QuadratureConfig = field(default_factory=QuadratureConfig)

    def __post_init__(self):
        if not self.c_B >= math.sqrt(3.0):
            raise ValueError("c_B must be at least sqrt(3)")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")


@dataclass(frozen=True)
class ObreState:
    """Scaling matrix ``A`` (lower triangular), centring ``a`` and the
    parameters they were solved at.  ``M2`` is the second weighted moment
    matrix at the returned ``(A, a)``."""

    A: np.ndarray
    a: np.ndarray
    theta: Params
    M2: np.ndarray | None = None
    iterations: int = 0
    nodes: int = 0

    def quad(self, cfg: "ObreConfig") -> QuadratureConfig:
        """Quadrature the state was solved with (``cfg.quad`` if unknown)."""
        if self.nodes <= cfg.quad.nodes:
            return cfg.quad
        return QuadratureConfig(self.nodes, cfg.quad.refine_factor, cfg.quad.tol)


@dataclass(frozen=True)
class Moments:
    q1: float
    m1: np.ndarray
    S1: np.ndarray
    q2: float
    m2: np.ndarray
    S2: np.ndarray

    def centred(self, a, power=1):
        """``E[W^power (s - a)(s - a)^T]``."""
        q, m, S = (self.q1, self.m1, self.S1) if power == 1 else (self.q2, self.m2, self.S2)
        M = S - np.outer(a, m) - np.outer(m, a) + q * np.outer(a, a)
        return 0.5 * (M + M.T)

    def centring_residual(self, a):
        """``E[W (s - a)]``; zero at a consistent centring vector."""
        return self.m1 - self.q1 * a


# ---------------------------------------------------------------------------
# weights

def obre_weights(st: ObreState, x, c_B: float):
    """Weights and ``psi = W (s - a)`` at observations ``x > 0``.

    Returns ``(W, psi)`` with shapes ``(n,)`` and ``(n, 3)``; a scalar
    ``x`` gives a scalar weight and a 3-vector.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    lx = np.log(np.atleast_1d(x))
    p = st.theta
    d = kernels.scores(p.alpha, p.c, p.k, lx) - st.a
    norm = np.linalg.norm(d @ st.A.T, axis=1)
    W = np.ones_like(norm)
    clip = norm > c_B
    W[clip] = c_B / norm[clip]
    psi = W[:, None] * d
    return (float(W[0]), psi[0]) if scalar else (W, psi)


def _kinks(p: Params, A, a, c_B, z):
    """Logit positions where ``||A(s - a)||`` crosses ``c_B`` between nodes."""
    f = kernels.obre_norms(p.alpha, p.c, p.k, logx_from_logit(p, z), A, a) - c_B
    idx = np.nonzero(np.sign(f[:-1]) * np.sign(f[1:]) < 0)[0]
    if idx.size == 0:
        return np.empty(0)
    lo, hi = z[idx].copy(), z[idx + 1].copy()
    f_lo, f_hi = f[idx].copy(), f[idx + 1].copy()
    # vectorised Illinois iteration: each step keeps a sign change and
    # halves the function value held at the stale endpoint
    for _ in range(60):
        mid = (lo * f_hi - hi * f_lo) / (f_hi - f_lo)
        f_mid = kernels.obre_norms(p.alpha, p.c, p.k, logx_from_logit(p, mid), A, a) - c_B
        left = np.sign(f_mid) == np.sign(f_lo)
        lo, f_lo = np.where(left, mid, lo), np.where(left, f_mid, 0.5 * f_lo)
        hi, f_hi = np.where(left, hi, mid), np.where(left, 0.5 * f_hi, f_mid)
        if np.all(hi - lo < 1e-10) or np.all(np.abs(f_mid) < 1e-13):
            break
    return 0.5 * (lo + hi)


def model_moments(p: Params, A, a, c_B: float, quad: QuadratureConfig | None = None) -> Moments:
    """Weighted score moments under the model at ``p``."""
    quad = quad or QuadratureConfig()
    z, w = logistic_rule(quad.nodes)
    breaks = _kinks(p, A, a, c_B, z)
    if breaks.size:
        z, w = logistic_rule(quad.nodes, breaks)
    q1, m1, S1, q2, m2, S2 = kernels.obre_moments(
        p.alpha, p.c, p.k, logx_from_logit(p, z), w, A, a, c_B)
    return Moments(q1, np.asarray(m1), np.asarray(S1), q2, np.asarray(m2), np.asarray(S2))


# ---------------------------------------------------------------------------
# (A, a) fixed point

def initial_state(theta: Params, quad: QuadratureConfig | None = None) -> ObreState:
    """``a = 0`` and ``A`` with ``A^T A = J^-1``."""
    J = fisher_information(theta, quad)
    return ObreState(A=inv_sqrt_spd(J), a=np.zeros(3), theta=theta, M2=J)


_ANDERSON_DEPTH = 5
_IU = np.triu_indices(3)


def _pack(a, M2):
    return np.concatenate([a, M2[_IU]])


def _unpack(v):
    M2 = np.zeros((3, 3))
    M2[_IU] = v[3:]
    return v[:3], M2 + np.triu(M2, 1).T


def _inner_tol(cfg: ObreConfig) -> float:
    # the inner solution feeds finite-difference-like outer steps, so it is
    # held well below the outer tolerance
    return min(cfg.tol, 1e-6) * 1e-3


def obre_solve_Aa(theta: Params, c_B: float, cfg: ObreConfig | None = None,
                  warm: ObreState | None = None) -> ObreState:
    """Iterate ``a`` and ``A`` to their fixed point at fixed ``theta``.

    One sweep maps ``(a, M2)`` to the centring vector and second moment
    matrix implied by ``A = chol(M2)^-1``.  Sweeps are mixed by Anderson
    acceleration, falling back to the plain sweep whenever the mixed
    ``M2`` is not positive definite.  Starts from ``warm`` when given,
    otherwise from :func:`initial_state`.  Raises :class:`EstimationError`
    after ``cfg.max_inner`` sweeps.

    At convergence the fixed-point equations are re-checked with the
    refined rule.  Near-singular ``M2`` (weakly identified ``alpha``)
    magnifies quadrature error, so while refinement still changes the
    residual materially the node count is doubled, up to ``_MAX_NODES``,
    and the iteration continues.  The
    count used is kept in the returned state and inherited by warm starts.
    """
    cfg = cfg or ObreConfig()
    quad = warm.quad(cfg) if warm is not None else cfg.quad
    if warm is not None and warm.M2 is not None:
        a, M2 = np.array(warm.a, dtype=float), np.array(warm.M2, dtype=float)
    else:
        st = initial_state(theta, quad)
        a, M2 = st.a, st.M2
    tol = _inner_tol(cfg)
    x = _pack(a, M2)
    xs, gs = [], []
    for it in range(1, cfg.max_inner + 1):
        a, M2 = _unpack(x)
        A = inv_sqrt_spd(M2)
        mom = model_moments(theta, A, a, c_B, quad)
        if not (mom.q1 > 0 and all(np.all(np.isfinite(v)) for v in (mom.m1, mom.S1, mom.S2))):
            raise EstimationError(f"degenerate weight moments at {theta}")
        a_new = mom.m1 / mom.q1
        M2_new = mom.centred(a_new, power=2)
        g = _pack(a_new, M2_new)
        # centring change and the standardised residual A M2 A^T - I, which
        # stays meaningful when M2 is close to singular
        da = np.max(np.abs(a_new - a) / np.maximum(1.0, np.abs(a_new)))
        dM = np.max(np.abs(A @ M2_new @ A.T - np.eye(3)))
        if max(da, dM) < tol:
            st = ObreState(A=inv_sqrt_spd(M2_new), a=a_new, theta=theta, M2=M2_new,
                           iterations=it, nodes=quad.nodes)
            fine = quad.refined()
            if fine.nodes > _MAX_NODES:
                return st
            res_fine = fixed_point_residual(st, c_B, fine)
            # below the threshold, or limited by rounding rather than by the rule
            if (res_fine <= _REFINED_RESIDUAL
                    or res_fine <= 2.0 * fixed_point_residual(st, c_B, quad)):
                return st
            quad = fine
            xs, gs = [], []
            x = g
            continue
        xs.append(x)
        gs.append(g)
        del xs[:-_ANDERSON_DEPTH - 1], gs[:-_ANDERSON_DEPTH - 1]
        x = _anderson(xs, gs)
    raise EstimationError(f"(A, a) iteration did not converge in {cfg.max_inner} sweeps")


def fixed_point_residual(st: ObreState, c_B: float, quad: QuadratureConfig) -> float:
    """Largest entry of ``A^T A M2 - I`` and ``E[W (s - a)]`` under ``quad``."""
    mom = model_moments(st.theta, st.A, st.a, c_B, quad)
    R = st.A.T @ st.A @ mom.centred(st.a, power=2) - np.eye(3)
    return float(max(np.max(np.abs(R)), np.max(np.abs(mom.centring_residual(st.a)))))


def _anderson(xs, gs):
    """Anderson-mixed ``(a, M2)``; the plain sweep when ``M2`` loses definiteness."""
    x = anderson_mix(xs, gs)
    try:
        np.linalg.cholesky(_unpack(x)[1])
    except np.linalg.LinAlgError:
        return gs[-1]
    return x


def empirical_psi(st: ObreState, lx: np.ndarray, c_B: float):
    """Weights and mean ``W (s - a)`` over a sample given as ``log x``."""
    p = st.theta
    W, total = kernels.obre_psi(p.alpha, p.c, p.k, lx, st.A, st.a, c_B)
    return np.asarray(W), np.asarray(total) / lx.shape[0]


# ---------------------------------------------------------------------------
# estimator

@dataclass
class ObreFit:
    """Full outcome of :func:`fit_obre_state`; ``result`` is what callers usually want."""

    result: EstimationResult
    state: ObreState
    weights: np.ndarray
    psi_mean: np.ndarray


def _delta(theta: Params, st: ObreState, psi, cfg: ObreConfig) -> np.ndarray:
    """Parameter step ``M1^-1 psi_mean`` at the solved state."""
    M1 = model_moments(theta, st.A, st.a, cfg.c_B, st.quad(cfg)).centred(st.a, power=1)
    delta = invert3(M1) @ psi
    if not np.all(np.isfinite(delta)):
        raise EstimationError("non-finite OBRE step")
    return delta


class _Equation:
    """Standardised estimating equation ``A psi_mean`` in log-parameter space.

    Keeps the last solved state so each evaluation warm-starts the inner
    iteration from its neighbour.
    """

    def __init__(self, lx, cfg: ObreConfig, st: ObreState):
        self.lx, self.cfg, self.st = lx, cfg, st

    def solve(self, theta: Params):
        st = obre_solve_Aa(theta, self.cfg.c_B, self.cfg, warm=self.st)
        W, psi = empirical_psi(st, self.lx, self.cfg.c_B)
        self.st = st
        return st, W, psi

    def __call__(self, eta):
        try:
            theta = Params.from_array(np.exp(eta))
            st, _, psi = self.solve(theta)
        except (ValueError, ArithmeticError, EstimationError, np.linalg.LinAlgError):
            return np.full(3, 1e6)
        return st.A @ psi


def fit_obre_state(s, cfg: ObreConfig | None = None, init: Params | None = None,
                   warm: ObreState | None = None) -> ObreFit:
    """OBRE with the converged ``(A, a)`` state and the final sample weights.

    ``init`` defaults to the ML estimate.  Each iteration takes the step
    ``M1^-1 psi_mean``, halved (up to ten times) while it would leave the
    positive orthant or increase ``||A psi_mean||``.  When a step only
    succeeds after several halvings the model-based ``M1`` is a poor
    Jacobian for this sample, and the fit finishes with a hybrid Powell
    solve of ``A psi_mean = 0`` in log-parameter space (see
    :func:`_root_phase`).  Either way the fit converges when the full step
    ``||M1^-1 psi_mean||`` is at most ``cfg.tol``.
    """
    cfg = cfg or ObreConfig()
    s = as_sample(s)
    lx = positive_log_values(s)
    if init is None:
        from .ml import fit_ml
        init = fit_ml(s).params
    theta = init
    eq = _Equation(lx, cfg, warm)
    st, W, psi = eq.solve(theta)
    norm = np.linalg.norm(st.A @ psi)

    converged = False
    it = 0
    while it < cfg.max_outer:
        it += 1
        delta = _delta(theta, st, psi, cfg)
        if np.linalg.norm(delta) <= cfg.tol:
            converged = True
            break
        base = theta.as_array()
        lam, accepted = 1.0, None
        for _ in range(_MAX_HALVINGS + 1):
            cand = base + lam * delta
            if np.all(cand > 0):
                accepted = eq.solve(Params.from_array(cand))
                if np.linalg.norm(accepted[0].A @ accepted[2]) <= norm:
                    break
            lam *= 0.5
        if accepted is None:
            raise EstimationError("OBRE step could not keep the parameters positive")
        st, W, psi = accepted
        theta = st.theta
        norm = np.linalg.norm(st.A @ psi)
        if lam < _STALL_STEP:
            theta, st, W, psi, used = _root_phase(eq, theta, cfg)
            it += used
            converged = bool(np.linalg.norm(_delta(theta, st, psi, cfg)) <= cfg.tol)
            break
    result = EstimationResult(theta, Method.OBRE, converged, it, float(np.linalg.norm(psi)))
    return ObreFit(result=result, state=st, weights=W, psi_mean=psi)


def _root_phase(eq: _Equation, theta: Params, cfg: ObreConfig):
    """Hybrid Powell solve of the estimating equation near ``theta``.

    The first attempt starts at ``theta``.  If it ends at a spurious
    minimum of ``||A psi_mean||`` rather than a root, further attempts start
    along the direction in which ``M1`` is closest to singular, where
    neighbouring roots lie when ``alpha`` is weakly identified.  Returns the
    first point that passes the step test, otherwise the attempt with the
    smallest residual.
    """
    eta0 = np.log(theta.as_array())
    M1 = model_moments(theta, eq.st.A, eq.st.a, cfg.c_B, eq.st.quad(cfg)).centred(eq.st.a, power=1)
    weak = np.linalg.svd(M1 * theta.as_array())[2][-1]
    starts = [eta0] + [eta0 + sgn * dist * weak for dist in _RESTART_DISTANCES for sgn in (1, -1)]
    best, nfev = None, 0
    for x0 in starts:
        sol = root(eq, x0, method="hybr", options={"xtol": 1e-12, "maxfev": 200})
        nfev += int(sol.nfev)
        try:
            cand = Params.from_array(np.exp(sol.x))
            st, W, psi = eq.solve(cand)
            step = np.linalg.norm(_delta(cand, st, psi, cfg))
        except (ValueError, ArithmeticError, EstimationError, np.linalg.LinAlgError):
            continue
        res = np.linalg.norm(st.A @ psi)
        if best is None or res < best[0]:
            best = (res, cand, st, W, psi)
        if step <= cfg.tol:
            break
    if best is None:
        raise EstimationError("OBRE root search failed at every start")
    eq.st = best[2]
    return best[1], best[2], best[3], best[4], nfev


def fit_obre(s, cfg: ObreConfig | None = None, init: Params | None = None) -> EstimationResult:
    """Optimal B-robust estimate; ``objective`` is ``||mean W (s - a)||``."""
    return fit_obre_state(s, cfg, init).result
