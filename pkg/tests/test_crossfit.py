import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfcpd import (
    CostCache,
    InvalidConfigError,
    LinearModel,
    SegmentCoster,
    SegmentInfeasibleError,
    Tuning,
    crossfit_cost,
    crossfit_cost_recycled,
    gaussian_mean_model,
    in_sample_cost,
    linear_model,
    make_folds,
    multivariate_data,
    regression_data,
    segment_cost,
)
from cfcpd.core import CROSSFIT, IN_SAMPLE
from cfcpd.crossfit import crossfit_terms, recycled_table


def one_based(plan, m):
    return (plan.members(m) + 1).tolist()


def test_make_folds_example_n10_m5():
    plan = make_folds(10, 5)
    assert [one_based(plan, m) for m in range(1, 6)] == [[1, 6], [2, 7], [3, 8], [4, 9], [5, 10]]


def test_make_folds_small_examples():
    plan = make_folds(4, 2)
    assert one_based(plan, 1) == [1, 3] and one_based(plan, 2) == [2, 4]
    assert make_folds(7, 3).sizes() == [3, 2, 2]


@pytest.mark.parametrize("n,M", [(5, 1), (3, 4), (0, 2)])
def test_make_folds_rejects(n, M):
    with pytest.raises(InvalidConfigError):
        make_folds(n, M)


@given(st.integers(2, 1000), st.integers(2, 10))
def test_fold_partition_laws(n, M):
    if M > n:
        return
    plan = make_folds(n, M)
    allrows = np.concatenate([plan.members(m) for m in range(1, M + 1)])
    assert np.array_equal(np.sort(allrows), np.arange(n))
    for m in range(1, M + 1):
        mem = plan.members(m)
        assert np.all(np.diff(mem) == M)
        assert np.all(plan.assignment[mem] == m)
    sizes = plan.sizes()
    assert max(sizes) - min(sizes) <= 1


def gm(values):
    return multivariate_data(np.asarray(values, dtype=float)[:, None])


def test_in_sample_examples():
    model = gaussian_mean_model()
    assert in_sample_cost(model, gm([2, 2, 2]), (0, 3)).value == 0.0
    assert in_sample_cost(model, gm([1, 3]), (0, 2)).value == pytest.approx(2.0)


def test_crossfit_hand_example():
    # f on {2,4} = 3 scored on {1,3}: 8; f on {1,3} = 1 scored on {2,4}: 8
    cost = crossfit_cost(gaussian_mean_model(), gm([1, 3, 1, 3]), (0, 4), make_folds(4, 2))
    assert cost.value == pytest.approx(16.0)
    assert cost.info["fold_terms"].tolist() == pytest.approx([8.0, 8.0])


class TruthPredictor:
    """Ignores its training data and returns a stored parameter."""

    tag = "truth"

    def __init__(self, f):
        self.f = np.asarray(f, dtype=float)

    def min_fit_size(self, M=None):
        return 1

    def fit(self, data, train, scope=None):
        return self.f

    def loss(self, data, param, rows):
        r = data.y[rows] - data.X[rows] @ param
        return float(r @ r)


def test_crossfit_constant_truth_predictor_is_zero(rng):
    f = rng.standard_normal(3)
    X = rng.standard_normal((20, 3))
    data = regression_data(X, X @ f)
    assert crossfit_cost(TruthPredictor(f), data, (0, 20), make_folds(20, 5)).value == pytest.approx(0, abs=1e-20)


def test_crossfit_value_is_sum_of_terms(rng):
    data = multivariate_data(rng.standard_normal((37, 3)))
    plan = make_folds(37, 5)
    cost = crossfit_cost(gaussian_mean_model(), data, (4, 31), plan)
    terms = crossfit_terms(gaussian_mean_model(), data, (4, 31), plan)
    assert cost.value == pytest.approx(sum(terms), rel=1e-14)


def test_crossfit_empty_fold_contributes_zero():
    data = gm([1.0, 2.0, 4.0, 8.0, 16.0, 32.0])
    plan = make_folds(6, 5)
    terms = crossfit_terms(gaussian_mean_model(), data, (1, 4), plan)
    assert terms[0] == 0.0 and terms[4] == 0.0


def test_recycled_singleton_grid_equals_crossfit(rng):
    X = rng.standard_normal((40, 6))
    data = regression_data(X, X[:, 0] + 0.3 * rng.standard_normal(40))
    plan = make_folds(40, 5)

    class OneLambda(LinearModel):
        def candidates(self, data, rows):
            return np.array([0.7])

    rec = crossfit_cost_recycled(OneLambda("lasso", Tuning.recycled()), data, (0, 40), plan)
    fixed = crossfit_cost(linear_model("lasso", Tuning.fixed(0.7)), data, (0, 40), plan)
    assert rec.value == pytest.approx(fixed.value, rel=1e-9)


def test_recycled_is_min_over_grid(rng):
    X = rng.standard_normal((60, 10))
    data = regression_data(X, X[:, :2].sum(axis=1) + rng.standard_normal(60))
    plan = make_folds(60, 5)
    model = linear_model("lasso", Tuning.recycled(grid_size=8, grid_ratio=0.01))
    rec = crossfit_cost_recycled(model, data, (5, 55), plan)
    cands, table = recycled_table(model, data, (5, 55), plan)
    assert rec.value == pytest.approx(table.sum(axis=0).min())
    for lam in cands:
        fixed = crossfit_cost(linear_model("lasso", Tuning.fixed(lam)), data, (5, 55), plan)
        assert rec.value <= fixed.value + 1e-8 * fixed.value


def test_recycled_noiseless_min_at_zero_lambda(rng):
    # noiseless, |I \ J_m| > p: lambda = 0 is exact OLS recovery
    X = rng.standard_normal((50, 4))
    data = regression_data(X, X @ np.array([1.0, -2.0, 0.5, 0.0]))

    class TwoLambdas(LinearModel):
        def candidates(self, data, rows):
            return np.array([50.0, 0.0])

    rec = crossfit_cost_recycled(TwoLambdas("lasso", Tuning.recycled()), data, (0, 50), make_folds(50, 5))
    assert rec.info["best"] == 1
    assert rec.value < 1e-10


def test_fold_relabeling_symmetry(rng):
    data = multivariate_data(rng.standard_normal((30, 2)))
    terms = crossfit_terms(gaussian_mean_model(), data, (0, 30), make_folds(30, 3))
    assert sum(terms[::-1]) == pytest.approx(sum(terms), rel=1e-14)


def test_in_sample_ignores_rows_outside_interval(rng):
    Z = rng.standard_normal((30, 2))
    a = in_sample_cost(gaussian_mean_model(), multivariate_data(Z), (10, 20)).value
    Z2 = Z.copy()
    Z2[:10] += 100.0
    Z2[20:] -= 7.0
    assert in_sample_cost(gaussian_mean_model(), multivariate_data(Z2), (10, 20)).value == a


@pytest.mark.parametrize("fitter,tuning", [
    ("lasso", Tuning.fixed(0.3)), ("lasso", Tuning.cv(B=5, grid_size=6, grid_ratio=0.05)),
    ("ridgeless", None), ("ls-selected", None)])
def test_fold_fit_ignores_evaluation_rows(rng, fitter, tuning):
    X = rng.standard_normal((60, 8))
    y = X[:, 0] - X[:, 1] + 0.5 * rng.standard_normal(60)
    model = linear_model(fitter, tuning)
    plan = make_folds(60, 5)
    rows = np.arange(0, 60)
    train = rows[rows % 5 != 2]
    f = model.fit(regression_data(X, y), train)
    X2, y2 = X.copy(), y.copy()
    ev = plan.members(3)
    X2[ev] = rng.standard_normal((ev.size, 8)) * 10
    y2[ev] = -y2[ev] + 3
    assert np.array_equal(model.fit(regression_data(X2, y2), train), f)


def test_infeasible_segment_raises():
    data = gm([1.0] * 10)
    model = linear_model("ridgeless")
    with pytest.raises(SegmentInfeasibleError):
        in_sample_cost(model, regression_data(np.ones((10, 1)), np.ones(10)), (0, 1))
    with pytest.raises(InvalidConfigError):
        in_sample_cost(gaussian_mean_model(), data, (3, 3))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 60), st.integers(1, 60), st.integers(2, 7), st.integers(0, 10**6))
def test_gaussian_fast_path_matches_generic(a, b, M, seed):
    n = 61
    s, e = min(a, b) - 1, max(a, b) + 1
    rng = np.random.default_rng(seed)
    data = multivariate_data(rng.standard_normal((n, 3)) * 3 + 1)
    model = gaussian_mean_model()
    plan = make_folds(n, M)
    fast = model.fast_cost(data, (s, e), CROSSFIT, plan)
    slow = crossfit_cost(model, data, (s, e), plan)
    assert fast.value == pytest.approx(slow.value, rel=1e-9, abs=1e-9)
    fi = model.fast_cost(data, (s, e), IN_SAMPLE, None)
    assert fi.value == pytest.approx(in_sample_cost(model, data, (s, e)).value, rel=1e-9, abs=1e-9)


def test_segment_coster_memoises(rng):
    data = multivariate_data(rng.standard_normal((20, 1)))
    cache = CostCache()
    c = SegmentCoster(gaussian_mean_model(), data, CROSSFIT, make_folds(20, 4), cache)
    v = c(2, 15)
    assert c(2, 15) == v
    assert (cache.hits, cache.misses) == (1, 1)
    assert segment_cost(gaussian_mean_model(), data, (2, 15), CROSSFIT, make_folds(20, 4)).value == v
