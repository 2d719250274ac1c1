import numpy as np
import pytest

from cfcpd import (
    DataError,
    InvalidConfigError,
    SearchConfig,
    SegmentInfeasibleError,
    Tuning,
    crossfit_cost,
    gaussian_mean_model,
    holdout_tune_global,
    in_sample_cost,
    linear_model,
    make_folds,
    multivariate_data,
    regression_data,
)
from cfcpd import lasso as L
from cfcpd.detector import detect, make_model
from cfcpd.core import GroundTruth, Segmentation


def test_gaussian_mean_fit_and_loss():
    model = gaussian_mean_model()
    data = multivariate_data(np.array([[2.0], [2.0], [2.0]]))
    assert model.fit(data, np.arange(3)) == pytest.approx([2.0])
    assert model.loss(multivariate_data(np.array([[1.0], [-1.0]])), np.zeros(1), np.arange(2)) == 2.0
    with pytest.raises(SegmentInfeasibleError):
        model.fit(data, np.array([], dtype=int))


def test_gaussian_mean_minimises_in_sample_loss(rng):
    Z = rng.standard_normal((25, 3))
    data = multivariate_data(Z)
    model = gaussian_mean_model()
    rows = np.arange(25)
    best = model.loss(data, model.fit(data, rows), rows)
    for _ in range(200):
        probe = rng.standard_normal(3)
        assert best <= model.loss(data, probe, rows)


def test_ridgeless_interpolates_wide_segments(rng):
    X = rng.standard_normal((40, 100))
    data = regression_data(X, rng.standard_normal(40))
    assert in_sample_cost(linear_model("ridgeless"), data, (5, 35)).value < 1e-18


def test_lasso_fixed_above_lambda_max_scores_sum_of_squares(rng):
    X = rng.standard_normal((30, 8))
    y = rng.standard_normal(30)
    lmax = L.lambda_max_from(X.T @ y, 30)
    model = linear_model("lasso", Tuning.fixed(1.01 * lmax))
    data = regression_data(X, y)
    assert in_sample_cost(model, data, (0, 30)).value == pytest.approx(y @ y)


def test_lasso_cv_noiseless_recovery(rng):
    f = np.zeros(20)
    f[:3] = [1.0, -1.5, 2.0]
    X = rng.standard_normal((200, 20))
    y = X @ f
    # the grid floor bounds the shrinkage bias, so it has to reach well below 1e-3
    model = linear_model("lasso", Tuning.cv(B=5, grid_ratio=1e-4))
    rows = np.arange(200)
    param = model.fit(regression_data(X, y), rows)
    ev = rng.standard_normal((50, 20))
    yev = ev @ f
    loss = model.loss(regression_data(ev, yev), param, np.arange(50))
    assert loss <= 1e-6 * (yev @ yev)


def test_lasso_objective_not_above_truth(rng):
    f = np.zeros(30)
    f[:5] = [1, -1, 1, -1, 1]
    X = rng.standard_normal((80, 30))
    y = X @ f + rng.standard_normal(80)
    for lam in [0.1, 0.5, 2.0]:
        param = linear_model("lasso", Tuning.fixed(lam)).fit(regression_data(X, y), np.arange(80))
        assert L.penalized_objective(X, y, param, lam) <= L.penalized_objective(X, y, f, lam)


def test_same_tag_same_inputs_identical_costs(rng):
    X = rng.standard_normal((60, 15))
    data = regression_data(X, X[:, 0] + rng.standard_normal(60))
    plan = make_folds(60, 5)
    a = linear_model("lasso", Tuning.cv(B=5, grid_size=8, grid_ratio=0.05))
    b = linear_model("lasso", Tuning.cv(B=5, grid_size=8, grid_ratio=0.05))
    assert a.tag == b.tag
    assert crossfit_cost(a, data, (0, 60), plan).value == crossfit_cost(b, data, (0, 60), plan).value
    assert a.tag != linear_model("lasso", Tuning.cv(B=4)).tag


def test_tags_distinguish_models():
    tags = {make_model(n, lam=0.5, k=3).tag for n in
            ["gaussian-mean", "lasso-fixed", "lasso-cv", "ridgeless", "ls-selected", "classifier-knn"]}
    assert len(tags) == 6


def test_linear_model_needs_regression_data():
    with pytest.raises(DataError):
        detect(multivariate_data(np.ones((20, 2))), linear_model("ridgeless"), "in-cv",
               SearchConfig.fixed_k(0, 5))


def test_unresolved_tuning_refuses_to_fit(rng):
    data = regression_data(rng.standard_normal((20, 3)), rng.standard_normal(20))
    with pytest.raises(InvalidConfigError):
        linear_model("lasso", Tuning.holdout()).fit(data, np.arange(20))


def test_tuning_validation():
    with pytest.raises(InvalidConfigError):
        Tuning("bogus")
    with pytest.raises(InvalidConfigError):
        Tuning.fixed(-1)
    with pytest.raises(InvalidConfigError):
        Tuning.cv(B=1)


def _single_change(n=120, p=10, seed=0, noise=0.0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    f1 = np.zeros(p)
    f1[:3] = [2.0, -2.0, 2.0]
    f2 = -f1
    tau = n // 2
    F = np.where((np.arange(n) < tau)[:, None], f1, f2)
    y = np.einsum("ij,ij->i", X, F) + noise * rng.standard_normal(n)
    truth = GroundTruth(Segmentation([tau], n), (f1, f2), (noise, noise))
    return regression_data(X, y, truth), tau


def test_holdout_singleton_grid():
    data, _ = _single_change()
    model = linear_model("lasso", Tuning.holdout())
    lam, diag = holdout_tune_global(data, model, "cf-ho", SearchConfig.fixed_k(1, 20), 5, grid=[0.4])
    assert lam == 0.4 and diag["errors"][0] == diag["errors"][0]


def test_holdout_records_one_error_per_grid_entry():
    data, _ = _single_change()
    grid = [5.0, 1.0, 0.2, 0.05]
    lam, diag = holdout_tune_global(data, linear_model("lasso", Tuning.holdout()), "in-ho",
                                    SearchConfig.fixed_k(1, 20), 5, grid=grid)
    assert len(diag["errors"]) == len(grid) and lam in grid
    assert diag["errors"][diag["best"]] == np.nanmin(diag["errors"])


@pytest.mark.parametrize("method", ["in-ho", "cf-ho"])
def test_holdout_noiseless_refit_finds_change(method):
    data, tau = _single_change()
    model = make_model("lasso-cv", grid_size=10, grid_ratio=0.01)
    res = detect(data, model, method, SearchConfig.fixed_k(1, 20), 5)
    assert abs(res.taus[0] - tau) <= 20
    assert len(res.stats["holdout"]["errors"]) == 10


def test_holdout_needs_four_rows():
    data = regression_data(np.ones((3, 1)), np.ones(3))
    with pytest.raises(InvalidConfigError):
        holdout_tune_global(data, linear_model("lasso", Tuning.holdout()), "in-ho",
                            SearchConfig.fixed_k(0, 1), 2)

