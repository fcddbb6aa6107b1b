"""Pure numpy implementations of the hot kernels.

Every function here has a drop-in twin in the compiled ``_kernels``
extension; :mod:`moebxii._backend` picks one at import time.  Arguments
are plain floats and 1-D float64 arrays (``lx`` is always ``log x``).
"""
import numpy as np
from scipy.special import expit

BACKEND = "python"


def _terms(alpha, c, k, lx):
    cl = c * lx
    L = np.logaddexp(0.0, cl)
    t = np.exp(-k * L)
    h = 1.0 - (1.0 - alpha) * t
    return cl, L, t, h


def loglik(alpha, c, k, lx):
    """Sum of log densities."""
    _, L, t, h = _terms(alpha, c, k, lx)
    n = lx.shape[0]
    return float(n * np.log(alpha * c * k) + (c - 1.0) * lx.sum() - (k + 1.0) * L.sum()
                 - 2.0 * np.log(h).sum())


def scores(alpha, c, k, lx):
    """Score rows, shape ``(n, 3)``."""
    cl, L, t, h = _terms(alpha, c, k, lx)
    e = expit(cl)
    abar = 1.0 - alpha
    out = np.empty((lx.shape[0], 3))
    out[:, 0] = 1.0 / alpha - 2.0 * t / h
    out[:, 1] = 1.0 / c + lx - (k + 1.0) * e * lx - 2.0 * k * abar * e * t * lx / h
    out[:, 2] = 1.0 / k - L - 2.0 * abar * t * L / h
    return out


def log_survival_residuals(alpha, c, k, lx, y):
    """``y - u`` with ``u = -log S(x) = k*L - log(alpha) + log(h)``."""
    _, L, t, h = _terms(alpha, c, k, lx)
    return y - (k * L - np.log(alpha) + np.log(h))


def ls_objective(alpha, c, k, lx, y):
    r = log_survival_residuals(alpha, c, k, lx, y)
    return float(r @ r)


def obre_norms(alpha, c, k, lx, A, a):
    """``||A (s(x) - a)||`` per observation."""
    d = scores(alpha, c, k, lx) - a
    return np.sqrt(np.einsum("ij,nj->ni", A, d) ** 2 @ np.ones(3))


def obre_moments(alpha, c, k, lx, w, A, a, cb):
    """Raw weighted moments of the score under OBRE weights.

    With ``W = min(1, cb / ||A(s - a)||)`` returns
    ``(q1, m1, S1, q2, m2, S2)`` where ``qj = sum w W^j``,
    ``mj = sum w W^j s`` and ``Sj = sum w W^j s s^T``.
    """
    s = scores(alpha, c, k, lx)
    d = s - a
    norm = np.sqrt((d @ A.T) ** 2 @ np.ones(3))
    W = np.ones_like(norm)
    clip = norm > cb
    W[clip] = cb / norm[clip]
    w1 = w * W
    w2 = w1 * W
    return (float(w1.sum()), w1 @ s, (s * w1[:, None]).T @ s,
            float(w2.sum()), w2 @ s, (s * w2[:, None]).T @ s)


def obre_psi(alpha, c, k, lx, A, a, cb):
    """Weights ``W`` and the sum of ``W (s - a)`` over the observations."""
    d = scores(alpha, c, k, lx) - a
    norm = np.sqrt((d @ A.T) ** 2 @ np.ones(3))
    W = np.ones_like(norm)
    clip = norm > cb
    W[clip] = cb / norm[clip]
    return W, W @ d
