"""The compiled kernels and the numpy fallback must agree."""
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from moebxii import _backend, _kernels_py as py

compiled = _backend.compiled
needs_ext = pytest.mark.skipif(compiled is None, reason="compiled extension not built")

pos = st.floats(min_value=0.1, max_value=10.0)
lx_st = st.lists(st.floats(min_value=-8, max_value=8), min_size=1, max_size=40).map(np.array)


def _state(seed):
    rng = np.random.default_rng(seed)
    A = np.tril(rng.uniform(0.2, 1.5, (3, 3))) + np.eye(3)
    return A, rng.normal(0, 0.3, 3)


def close(a, b):
    np.testing.assert_allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float),
                               rtol=1e-12, atol=1e-12)


@needs_ext
@settings(max_examples=60, deadline=None)
@given(pos, pos, pos, lx_st)
def test_likelihood_kernels_agree(alpha, c, k, lx):
    close(compiled.loglik(alpha, c, k, lx), py.loglik(alpha, c, k, lx))
    close(compiled.scores(alpha, c, k, lx), py.scores(alpha, c, k, lx))
    y = np.linspace(0.01, 3, lx.size)
    close(compiled.log_survival_residuals(alpha, c, k, lx, y),
          py.log_survival_residuals(alpha, c, k, lx, y))
    close(compiled.ls_objective(alpha, c, k, lx, y), py.ls_objective(alpha, c, k, lx, y))


@needs_ext
@settings(max_examples=40, deadline=None)
@given(pos, pos, pos, lx_st, st.integers(0, 10 ** 6), st.floats(1.8, 20))
def test_obre_kernels_agree(alpha, c, k, lx, seed, cb):
    A, a = _state(seed)
    close(compiled.obre_norms(alpha, c, k, lx, A, a), py.obre_norms(alpha, c, k, lx, A, a))
    W1, t1 = compiled.obre_psi(alpha, c, k, lx, A, a, cb)
    W2, t2 = py.obre_psi(alpha, c, k, lx, A, a, cb)
    close(W1, W2)
    close(t1, t2)
    w = np.full(lx.size, 1.0 / lx.size)
    for u, v in zip(compiled.obre_moments(alpha, c, k, lx, w, A, a, cb),
                    py.obre_moments(alpha, c, k, lx, w, A, a, cb)):
        close(u, v)


def test_fallback_names_itself():
    assert py.BACKEND == "python"
    assert _backend.BACKEND in ("python", "cython")


@pytest.mark.parametrize("flag,expected", [("1", "python"), ("", None)])
def test_environment_selects_backend(flag, expected):
    env = dict(os.environ, MOEBXII_PURE_PYTHON=flag)
    out = subprocess.run([sys.executable, "-c", "import moebxii; print(moebxii.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True).stdout.strip()
    if expected is None:
        expected = "python" if compiled is None else "cython"
    assert out == expected
