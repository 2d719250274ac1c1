import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cfcpd import (
    CROSSFIT,
    IN_SAMPLE,
    DataError,
    UnsupportedModelError,
    bias_decomposition,
    classifier_loss_model,
    crossfit_cost,
    delta_k,
    gaussian_mean_model,
    gen_dgp1,
    gen_single_cp_linear,
    in_sample_cost,
    linear_model,
    make_folds,
    multivariate_data,
    oracle_param,
    regression_data,
    xi_of_segment,
)
from cfcpd.core import GroundTruth, Segmentation
from cfcpd.diagnostics import crossfit_fits, expectation_gap, oracle_params
from cfcpd.lasso import lasso_fit, ls_on_selected, screen_top
from cfcpd.models import Tuning


def step_truth(values, n_per):
    taus = [n_per * (k + 1) for k in range(len(values) - 1)]
    params = [np.array([float(v)]) for v in values]
    return GroundTruth(Segmentation(taus, n_per * len(values)), params, [1.0] * len(values))


def test_oracle_param_examples():
    truth = step_truth([0, 2], 2)
    assert oracle_param(truth, (0, 4)) == pytest.approx([1.0])
    assert oracle_param(truth, (1, 3)) == pytest.approx([1.0])
    assert oracle_param(truth, (2, 4)) == pytest.approx([2.0])


def test_oracle_param_homogeneous_is_exact(small_dgp1):
    truth = small_dgp1.truth
    b = truth.changepoints.boundaries
    for k in range(len(b) - 1):
        got = oracle_param(truth, (b[k] + 1, b[k + 1] - 2))
        assert np.array_equal(got, truth.segment_params[k])


def test_oracle_param_rejects_other_models():
    with pytest.raises(UnsupportedModelError):
        oracle_param(step_truth([0, 1], 3), (0, 6), classifier_loss_model())
    with pytest.raises(DataError):
        oracle_param(multivariate_data(np.zeros((4, 1))), (0, 4))


def test_delta_k_single_change():
    data = gen_single_cp_linear(5.0, seed=1, n=50, p=20)
    S = data.truth.sigma
    f1 = data.truth.segment_params[0]
    # f2 - f1 = sqrt(b/5) f1 = f1 when b = 5
    assert delta_k(data.truth, S)[0] == pytest.approx(float(f1 @ S @ f1), rel=1e-14)


def test_delta_k_zero_and_permutation(rng):
    f = rng.standard_normal(4)
    g = rng.standard_normal(4)
    A = rng.standard_normal((4, 4))
    S = A @ A.T
    truth = GroundTruth(Segmentation([3, 6], 9), [f, f, g], [1, 1, 1])
    d = delta_k(truth, S)
    assert d[0] == 0.0
    perm = rng.permutation(4)
    truth_p = GroundTruth(Segmentation([3, 6], 9), [f[perm], f[perm], g[perm]], [1, 1, 1])
    assert delta_k(truth_p, S[np.ix_(perm, perm)])[1] == pytest.approx(d[1], rel=1e-12)
    with pytest.raises(DataError):
        delta_k(truth, np.eye(3))


def test_oracle_params_bundle():
    truth = step_truth([0, 2], 2)
    out = oracle_params(truth, [(0, 4), (2, 4)])
    assert out.f_circ_by_interval[(2, 4)] == pytest.approx([2.0]) and out.delta == [4.0]


def _noiseless_regression(rng, n=30, p=4):
    X = rng.standard_normal((n, p))
    f = rng.standard_normal(p)
    truth = GroundTruth(Segmentation([], n), [f], [0.0], None, np.zeros(n))
    return regression_data(X, X @ f, truth), f


def test_xi_noiseless_at_truth_is_zero(rng):
    data, f = _noiseless_regression(rng)
    r = data.y[5:20] - data.X[5:20] @ f
    assert xi_of_segment(data, (5, 20), float(r @ r)) == 0.0


def test_xi_homogeneous_has_no_expectation_term(rng):
    data = gen_single_cp_linear(5.0, seed=2, n=60, p=10)
    cost = in_sample_cost(linear_model("ridgeless"), data, (0, 18))
    F = data.truth.param_of_row()[0:18]
    oracle = float(np.sum((data.y[:18] - np.einsum("ij,ij->i", data.X[:18], F)) ** 2))
    assert expectation_gap(data, (0, 18)) == 0.0
    assert xi_of_segment(data, (0, 18), cost) == pytest.approx(cost.value - oracle, abs=1e-9)


def test_xi_mean_model_minimiser_below_oracle(rng):
    Z = rng.standard_normal((40, 3))
    truth = GroundTruth(Segmentation([20], 40), [np.zeros(3), np.ones(3)], [1, 1])
    data = multivariate_data(Z + truth.param_of_row(), truth)
    model = gaussian_mean_model()
    for iv in [(0, 20), (10, 30), (5, 40)]:
        rows = np.arange(*iv)
        f0 = oracle_param(truth, iv)
        at_fit = xi_of_segment(data, iv, in_sample_cost(model, data, iv), model)
        at_oracle = xi_of_segment(data, iv, model.loss(data, f0, rows), model)
        assert at_fit <= at_oracle + 1e-12


def test_xi_crossfit_mean_drift_monte_carlo():
    # E[L_I] exceeds the oracle loss by sum_m |I∩J_m| p / |I\J_m|
    R, n, p, M = 500, 30, 2, 3
    folds = make_folds(n, M)
    model = gaussian_mean_model()
    truth = GroundTruth(Segmentation([], n), [np.zeros(p)], [1.0])
    rng = np.random.default_rng(11)
    xs = np.array([_xi_once(rng, n, p, folds, model, truth) for _ in range(R)])
    drift = sum(len(folds.members_in(m, 0, n)) * p / (n - len(folds.members_in(m, 0, n)))
                for m in range(1, M + 1))
    bound = 4 * xs.std(ddof=1) / np.sqrt(R)
    assert xs.mean() > 0
    assert abs(xs.mean() - drift) <= bound


def _xi_once(rng, n, p, folds, model, truth):
    data = multivariate_data(rng.standard_normal((n, p)), truth)
    return xi_of_segment(data, (0, n), crossfit_cost(model, data, (0, n), folds), model)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([IN_SAMPLE, CROSSFIT]))
def test_decomposition_additivity(seed, mode):
    rng = np.random.default_rng(seed)
    data = gen_dgp1(1.0, rng=rng, n=80, p=12)
    s = int(rng.integers(0, 50))
    e = int(rng.integers(s + 20, 81))
    folds = make_folds(80, 4)
    model = linear_model("lasso", Tuning.fixed(float(rng.uniform(0.05, 2.0))))
    if mode == IN_SAMPLE:
        fit = model.fit(data, np.arange(s, e))
    else:
        fit = crossfit_fits(model, data, (s, e), folds)
    d = bias_decomposition(data, (s, e), fit, mode, folds)
    assert abs(d.residual()) <= 1e-8 * max(1.0, abs(d.xi))


def test_decomposition_at_oracle_has_no_fit_terms():
    data = gen_single_cp_linear(5.0, seed=4, n=60, p=10)
    d = bias_decomposition(data, (0, 18), data.truth.segment_params[0])
    assert d.cross == 0.0 and d.squared == 0.0


def test_in_sample_selected_cross_term_is_projection():
    rng = np.random.default_rng(5)
    n, p = 60, 40
    X = rng.standard_normal((n, p))
    u = rng.standard_normal(n)
    truth = GroundTruth(Segmentation([], n), [np.zeros(p)], [1.0], None, u)
    data = regression_data(X, u, truth)
    crosses = []
    for d in [5, 15, 30]:
        sel = screen_top(X, u, d)
        fit = ls_on_selected(X, u, sel)
        Xs = X[:, sel]
        Pu = Xs @ np.linalg.lstsq(Xs, u, rcond=None)[0]
        out = bias_decomposition(data, (0, n), fit)
        assert out.cross == pytest.approx(-2 * Pu @ Pu, rel=1e-9)
        assert out.squared == pytest.approx(Pu @ Pu, rel=1e-9)
        crosses.append(out.cross)
    assert crosses[0] > crosses[1] > crosses[2]


def test_decomposition_refuses_multivariate():
    with pytest.raises(UnsupportedModelError):
        bias_decomposition(multivariate_data(np.zeros((4, 1))), (0, 4), np.zeros(1))


def test_lasso_fit_object_accepted(rng):
    data = gen_single_cp_linear(5.0, seed=3, n=60, p=10)
    fit = lasso_fit(data.X[:18], data.y[:18], 0.5)
    d = bias_decomposition(data, (0, 18), fit)
    assert abs(d.residual()) < 1e-8 * max(1, abs(d.xi))


@pytest.fixture
def small_dgp1():
    return gen_dgp1(1.0, seed=0, n=100, p=20)
