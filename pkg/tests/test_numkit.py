import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from moebxii.numkit import (NotPositiveDefiniteError, OptimConfig, QuadratureConfig,
                            QuadratureError, SingularMatrixError, anderson_mix,
                            integrate01, integrate_logistic, inv_sqrt_spd, invert3,
                            logistic_rule, minimize, sqrt_spd)


# --- quadrature -------------------------------------------------------------

def test_integrate01_examples():
    assert integrate01(lambda u: np.ones_like(u)) == pytest.approx(1.0, abs=1e-15)
    assert integrate01(lambda u: u) == pytest.approx(0.5, abs=1e-15)
    assert integrate01(lambda u: u ** 2) == pytest.approx(1 / 3, abs=1e-15)


def test_integrate01_vector_valued():
    out = integrate01(lambda u: np.stack([u, u ** 3], axis=1))
    np.testing.assert_allclose(out, [0.5, 0.25], atol=1e-15)


def test_integrate01_polynomial_exactness():
    cfg = QuadratureConfig(nodes=16)
    deg = 2 * cfg.nodes - 1
    got = integrate01(lambda u: u ** deg, cfg)
    assert got == pytest.approx(1 / (deg + 1), rel=1e-13)


def test_integrate01_refinement_failure():
    # oscillation that neither rule resolves
    with pytest.raises(QuadratureError):
        integrate01(lambda u: np.sin(5000 * u), QuadratureConfig(nodes=16))


def test_logistic_rule_weights_and_moments():
    z, w = logistic_rule(256)
    assert np.all(w > 0)
    assert np.all(np.diff(z) > 0)
    u = 1 / (1 + np.exp(-z))
    assert w.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.sum(w * u) == pytest.approx(0.5, abs=1e-15)
    # log-singular endpoint: int_0^1 log(u) du = -1
    assert np.sum(w * np.log(u)) == pytest.approx(-1.0, abs=1e-14)


def test_logistic_rule_breaks_are_panel_edges():
    z0, _ = logistic_rule(256)
    z1, w1 = logistic_rule(256, breaks=[0.123, 100.0])
    assert z1.size == z0.size + 8
    assert w1.sum() == pytest.approx(1.0, abs=1e-15)
    # a kink at the break is integrated to full accuracy
    kink = lambda z: np.maximum(z - 0.123, 0.0)
    ref = integrate_logistic(lambda z, w: np.sum(w * kink(z)), QuadratureConfig(nodes=2048),
                             breaks=[0.123])
    assert np.sum(w1 * kink(z1)) == pytest.approx(ref, rel=1e-12)


def test_quadrature_config_validation():
    for kw in (dict(nodes=8), dict(refine_factor=1), dict(tol=0)):
        with pytest.raises(ValueError):
            QuadratureConfig(**kw)


def test_quadrature_config_env(monkeypatch):
    monkeypatch.setenv("MOEBXII_QUAD_NODES", "512")
    assert QuadratureConfig.from_env().nodes == 512
    monkeypatch.delenv("MOEBXII_QUAD_NODES")
    assert QuadratureConfig.from_env().nodes == 256
    assert QuadratureConfig(nodes=64).refined().nodes == 128


# --- 3x3 linear algebra -----------------------------------------------------

def test_invert3_example():
    m = np.array([[2.0, 0, 0], [0, 4, 0], [0, 0, 0.5]])
    np.testing.assert_allclose(invert3(m), np.diag([0.5, 0.25, 2.0]))
    m = np.array([[4.0, 1, 0], [1, 3, 1], [0, 1, 2]])
    np.testing.assert_allclose(invert3(m) @ m, np.eye(3), atol=1e-14)


def test_invert3_singular():
    with pytest.raises(SingularMatrixError):
        invert3(np.array([[1.0, 2, 3], [2, 4, 6], [0, 0, 1]]))
    with pytest.raises(SingularMatrixError):
        invert3(np.full((3, 3), np.nan))


def test_sqrt_spd():
    m = np.array([[4.0, 2, 0], [2, 5, 1], [0, 1, 3]])
    L = sqrt_spd(m)
    assert np.allclose(np.triu(L, 1), 0)
    np.testing.assert_allclose(L @ L.T, m, atol=1e-14)
    A = inv_sqrt_spd(m)
    np.testing.assert_allclose(A.T @ A, np.linalg.inv(m), atol=1e-14)
    with pytest.raises(NotPositiveDefiniteError):
        sqrt_spd(np.diag([1.0, -1.0, 1.0]))


spd_st = st.lists(st.floats(-3, 3), min_size=9, max_size=9).map(
    lambda v: np.reshape(v, (3, 3)) @ np.reshape(v, (3, 3)).T + 0.5 * np.eye(3))


@settings(max_examples=50, deadline=None)
@given(spd_st, st.integers(0, 2 ** 31))
def test_inverse_sqrt_is_rotation_equivariant(m, seed):
    # A^T A = inv(M) for any orthogonal change of basis
    R = Rotation.random(random_state=seed).as_matrix()
    A = inv_sqrt_spd(R @ m @ R.T)
    np.testing.assert_allclose(A.T @ A, R @ np.linalg.inv(m) @ R.T, rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(invert3(m) @ m, np.eye(3), atol=1e-9)


# --- Anderson mixing --------------------------------------------------------

def test_anderson_plain_update_with_one_pair():
    assert np.array_equal(anderson_mix([np.zeros(2)], [np.ones(2)]), np.ones(2))


def test_anderson_solves_linear_map_exactly():
    # x -> B x + b is affine; with n + 1 pairs mixing lands on the fixed point
    rng = np.random.default_rng(0)
    B = 0.9 * rng.standard_normal((3, 3)) / 3
    b = rng.standard_normal(3)
    fixed = np.linalg.solve(np.eye(3) - B, b)
    xs = [rng.standard_normal(3) for _ in range(4)]
    gs = [B @ x + b for x in xs]
    np.testing.assert_allclose(anderson_mix(xs, gs), fixed, atol=1e-10)


# --- minimisation -----------------------------------------------------------

def test_minimize_quadratic():
    x, ok = minimize(lambda v: np.sum((v - [1.0, -2.0, 3.0]) ** 2), np.zeros(3))
    assert ok
    np.testing.assert_allclose(x, [1, -2, 3], atol=1e-6)


def test_minimize_rosenbrock3():
    def rosen(v):
        return sum(100 * (v[i + 1] - v[i] ** 2) ** 2 + (1 - v[i]) ** 2 for i in range(2))
    x, ok = minimize(rosen, [-1.2, 1.0, 1.0], OptimConfig(max_iter=5000, restarts=4))
    assert ok
    np.testing.assert_allclose(x, 1.0, atol=1e-4)


def test_minimize_constant_function():
    x, ok = minimize(lambda v: 7.0, [0.3, 0.4])
    assert ok
    assert np.all(np.isfinite(x))


def test_minimize_rejects_non_finite_start():
    with pytest.raises(ValueError):
        minimize(lambda v: np.inf, [0.0])


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_minimize_translation_invariance(shift):
    shift = np.array(shift)
    f = lambda v: np.sum((v - shift) ** 2 * [1.0, 2.0, 4.0])
    x, ok = minimize(f, np.zeros(3))
    assert ok
    np.testing.assert_allclose(x, shift, atol=1e-5)


def test_optim_config_validation():
    for kw in (dict(max_iter=0), dict(f_tol=0), dict(restarts=-1)):
        with pytest.raises(ValueError):
            OptimConfig(**kw)
