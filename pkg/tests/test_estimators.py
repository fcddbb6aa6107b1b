import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from moebxii.dist import DomainError, Params, Sample, fisher_information, quantile, sample
from moebxii.estimators import (DegenerateSampleError, EstimationError, EstimationResult,
                                FitSettings, MEstConfig, Method, ObreConfig, ObreState,
                                TransformedSample, fit_ls, fit_m_tukey, fit_many, fit_ml,
                                fit_obre, fit_obre_state, obre_solve_Aa, obre_weights)
from moebxii.estimators.ls import ls_objective, model_gradient, normal_equations
from moebxii.estimators.ml import score_sums
from moebxii.estimators.obre import initial_state, model_moments
from moebxii.estimators.tukey import tukey_objective, tukey_rho, tukey_weights

TRUTH = Params(3, 2, 2)


@pytest.fixture(scope="module")
def clean():
    return sample(TRUTH, 100, seed=2024)


def noiseless(p, n):
    """Sample whose order statistics sit exactly at the plotting positions."""
    u = (np.arange(1, n + 1) - 0.5) / n
    return Sample(quantile(p, u))


# --- shared checks ----------------------------------------------------------

def test_method_parse():
    assert Method.parse("m") is Method.M_TUKEY
    assert Method.parse("m-tukey") is Method.M_TUKEY
    assert Method.parse(" obr ") is Method.OBRE
    assert Method.parse("ml") is Method.ML
    with pytest.raises(ValueError):
        Method.parse("bayes")


@pytest.mark.parametrize("fit", [fit_ml, fit_ls, fit_m_tukey, fit_obre])
def test_degenerate_samples(fit):
    with pytest.raises(DegenerateSampleError):
        fit([1.0, 2.0, 3.0])
    with pytest.raises(DegenerateSampleError):
        fit([2.0] * 10)


def test_result_as_dict_keys(clean):
    d = fit_ml(clean).as_dict()
    assert list(d) == ["method", "alpha", "c", "k", "converged", "iterations", "objective"]
    assert d["method"] == "ML"
    assert isinstance(d["converged"], bool)


# --- ML ---------------------------------------------------------------------

def test_ml_solves_likelihood_equations(clean):
    res = fit_ml(clean)
    assert res.converged
    assert np.all(np.abs(score_sums(res.params, clean)) < 1e-4 * len(clean))


def test_ml_beats_truth_in_likelihood(clean):
    from moebxii.dist import log_pdf
    res = fit_ml(clean)
    assert res.objective >= log_pdf(TRUTH, clean.values).sum()
    assert res.objective == pytest.approx(log_pdf(res.params, clean.values).sum(), rel=1e-12)


def test_ml_on_large_sample():
    res = fit_ml(sample(TRUTH, 3000, seed=9))
    np.testing.assert_allclose(res.params.as_array(), TRUTH.as_array(), rtol=0.3)


# --- LS ---------------------------------------------------------------------

def test_ls_transform_positions():
    ts = TransformedSample.from_sample(Sample([3.0, 1.0, 2.0, 4.0]))
    np.testing.assert_allclose(ts.y, -np.log1p(-(np.arange(1, 5) - 0.5) / 4))
    assert ts.x_sorted.tolist() == [1.0, 2.0, 3.0, 4.0]


def test_ls_recovers_noiseless_truth():
    s = noiseless(TRUTH, 60)
    ts = TransformedSample.from_sample(s)
    assert ls_objective(TRUTH, ts) < 1e-24
    res = fit_ls(s)
    assert res.converged
    assert res.objective < 1e-12
    np.testing.assert_allclose(res.params.as_array(), TRUTH.as_array(), rtol=1e-3)


def test_ls_optimum(clean):
    ts = TransformedSample.from_sample(clean)
    res = fit_ls(clean)
    assert res.objective <= ls_objective(TRUTH, ts)
    scale = np.abs(ts.y - ts.model(res.params)) @ np.abs(model_gradient(res.params, ts.log_x))
    assert np.all(np.abs(normal_equations(res.params, ts)) < 1e-3 * np.maximum(scale, 1))


def test_ls_model_gradient_finite_differences():
    lx = np.log(np.geomspace(0.05, 10, 12))
    ts = TransformedSample(np.zeros_like(lx), np.exp(lx))
    g = model_gradient(TRUTH, lx)
    for j in range(3):
        up, dn = TRUTH.as_array(), TRUTH.as_array()
        h = 1e-6 * up[j]
        up[j] += h
        dn[j] -= h
        fd = (ts.model(Params.from_array(up)) - ts.model(Params.from_array(dn))) / (2 * h)
        np.testing.assert_allclose(g[:, j], fd, rtol=1e-6, atol=1e-9)


# --- Tukey M ----------------------------------------------------------------

def test_tukey_weight_and_rho_examples():
    np.testing.assert_allclose(tukey_weights([0.0, 0.5, 1.0, 2.0], 1.0), [1, 0.5625, 0, 0])
    b = 1.345
    assert tukey_rho(10.0, b) == pytest.approx(b * b / 6)
    # rho'(r) = r w(r)
    r, h = 0.7, 1e-6
    assert (tukey_rho(r + h, b) - tukey_rho(r - h, b)) / (2 * h) == pytest.approx(
        r * tukey_weights(r, b), rel=1e-8)


def test_tukey_noiseless_fixed_point():
    s = noiseless(TRUTH, 60)
    ts = TransformedSample.from_sample(s)
    r = ts.y - ts.model(TRUTH)
    assert np.all(tukey_weights(r, 1.345) == pytest.approx(1.0))
    res = fit_m_tukey(s, init=TRUTH)
    assert res.converged
    np.testing.assert_allclose(res.params.as_array(), TRUTH.as_array(), rtol=1e-6)


def test_tukey_rejects_gross_outlier():
    x = sample(TRUTH, 60, seed=3).values.copy()
    x[-1] = 1e6
    s = Sample(x)
    # started near the bulk of the data; from a degenerate LS start the
    # redescending objective has another local minimum that fits the outlier
    res = fit_m_tukey(s, init=TRUTH)
    assert res.converged
    ts = TransformedSample.from_sample(s)
    r = ts.y - ts.model(res.params)
    assert tukey_weights(r, 1.345)[-1] == 0.0


def test_tukey_objective_monotone(clean):
    trace = []
    res = fit_m_tukey(clean, init=Params(1, 1, 1), trace=trace)
    assert len(trace) >= 2
    assert np.all(np.diff(trace) <= 1e-12)
    ts = TransformedSample.from_sample(clean)
    assert res.objective == pytest.approx(tukey_objective(res.params, ts, 1.345))


def test_tukey_all_weights_vanish():
    with pytest.raises(EstimationError):
        fit_m_tukey(sample(TRUTH, 30, seed=1), MEstConfig(b=1e-9), init=Params(20, 0.2, 5))


def test_mest_config_validation():
    with pytest.raises(ValueError):
        MEstConfig(b=0)


# --- OBRE -------------------------------------------------------------------

def test_obre_weight_examples():
    p = Params(2, 1, 1)
    st_ = ObreState(A=np.eye(3), a=np.zeros(3), theta=p)
    s = np.array([-1 / 6, 1.0, 1 - math.log(2) / 3])
    norm = float(np.linalg.norm(s))
    W, psi = obre_weights(st_, 1.0, 10.0)
    assert W == 1.0
    np.testing.assert_allclose(psi, s, rtol=1e-14)
    W, psi = obre_weights(st_, 1.0, norm / 2)
    assert W == pytest.approx(0.5, rel=1e-14)
    np.testing.assert_allclose(psi, s / 2, rtol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=30),
       st.floats(min_value=math.sqrt(3), max_value=50))
def test_obre_weights_bounded(xs, c_B):
    state = obre_solve_Aa(TRUTH, 3.0)
    W, psi = obre_weights(state, np.array(xs), c_B)
    assert np.all((W > 0) & (W <= 1))
    assert np.all(np.linalg.norm(psi @ state.A.T, axis=1) <= c_B * (1 + 1e-12))


def test_obre_large_bound_is_fisher_standardisation():
    state = obre_solve_Aa(TRUTH, 1e6)
    J = fisher_information(TRUTH)
    np.testing.assert_allclose(state.a, 0.0, atol=1e-10)
    np.testing.assert_allclose(state.M2, J, rtol=1e-8, atol=1e-12)
    np.testing.assert_allclose(state.A.T @ state.A @ J, np.eye(3), atol=1e-8)


def test_obre_fixed_point_residuals():
    cfg = ObreConfig()
    state = obre_solve_Aa(TRUTH, cfg.c_B, cfg)
    mom = model_moments(TRUTH, state.A, state.a, cfg.c_B, cfg.quad)
    np.testing.assert_allclose(state.A.T @ state.A @ mom.centred(state.a, 2), np.eye(3), atol=1e-8)
    assert np.all(np.abs(mom.centring_residual(state.a)) < 1e-9)
    # the bound makes the weights bite: some mass is downweighted
    assert mom.q1 < 1.0


def test_obre_warm_start_gives_same_state():
    cold = obre_solve_Aa(TRUTH, 3.0)
    warm = obre_solve_Aa(Params(3.01, 2, 2), 3.0, warm=cold)
    ref = obre_solve_Aa(Params(3.01, 2, 2), 3.0)
    np.testing.assert_allclose(warm.a, ref.a, rtol=1e-7, atol=1e-10)
    assert warm.iterations < ref.iterations


def test_obre_initial_state():
    st0 = initial_state(TRUTH)
    np.testing.assert_allclose(st0.A.T @ st0.A, np.linalg.inv(fisher_information(TRUTH)), rtol=1e-10)


def test_obre_tends_to_ml(clean):
    ml = fit_ml(clean)
    ob = fit_obre(clean, ObreConfig(c_B=1e6), init=ml.params)
    assert ob.converged
    np.testing.assert_allclose(ob.params.as_array(), ml.params.as_array(), rtol=1e-3)


def test_obre_fit_is_bounded(clean):
    cfg = ObreConfig()
    fit = fit_obre_state(clean, cfg)
    assert fit.result.converged
    W, psi = obre_weights(fit.state, clean.sorted, cfg.c_B)
    np.testing.assert_allclose(W, fit.weights, rtol=1e-14)
    assert np.all((W > 0) & (W <= 1))
    assert np.all(np.linalg.norm(psi @ fit.state.A.T, axis=1) <= cfg.c_B * (1 + 1e-12))
    np.testing.assert_allclose(psi.mean(axis=0), fit.psi_mean, atol=1e-14)
    assert np.linalg.norm(fit.psi_mean) < 1e-5


def test_obre_config_validation():
    with pytest.raises(ValueError):
        ObreConfig(c_B=1.0)
    with pytest.raises(ValueError):
        ObreConfig(tol=0)


# --- orchestration ----------------------------------------------------------

def test_permutation_invariance_is_exact(clean):
    shuffled = Sample(np.random.default_rng(5).permutation(clean.values))
    a = fit_many(clean, list(Method))
    b = fit_many(shuffled, list(Method))
    for m in Method:
        assert a[m].params == b[m].params


def test_fit_many_uses_prerequisites(clean):
    out = fit_many(clean, ["obre", "m"])
    assert set(out) == {Method.OBRE, Method.M_TUKEY}
    ml = fit_ml(clean)
    ls = fit_ls(clean)
    assert out[Method.OBRE].params == fit_obre(clean, init=ml.params).params
    assert out[Method.M_TUKEY].params == fit_m_tukey(clean, init=ls.params).params
    assert all(isinstance(r, EstimationResult) for r in out.values())


def test_fit_many_reports_failures():
    s = sample(TRUTH, 30, seed=1)
    out = fit_many(s, ["M"], FitSettings(mest=MEstConfig(b=1e-12)))
    assert isinstance(out[Method.M_TUKEY], EstimationError)


def test_estimators_reject_non_positive():
    with pytest.raises(DomainError):
        fit_ml([1.0, 2.0, 3.0, 0.0, 5.0])
