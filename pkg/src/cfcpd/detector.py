"""The five detection methods, hold-out tuning, and an estimator front end.

``in-ho``   in-sample costs, one global hyperparameter chosen on an odd/even split
``in-cv``   in-sample costs, hyperparameter cross-validated inside every segment
``cf-ho``   cross-fitted costs, one global hold-out hyperparameter
``cf-cv``   cross-fitted costs, per-segment cross-validation inside each training fold
``cf-cv*``  cross-fitted costs minimised over the grid (recycled folds)
"""

from __future__ import annotations

import logging
import time
import warnings

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import lasso as _lasso
from .classifier import ClassifierLossModel, KnnClassifier
from .core import (
    CROSSFIT,
    CROSSFIT_RECYCLED,
    IN_SAMPLE,
    MULTIVARIATE,
    REGRESSION,
    Dataset,
)
from .crossfit import SegmentCoster, make_folds
from .exceptions import CpdError, InvalidConfigError, TuningFailedError
from .models import (
    CV,
    FIXED,
    HOLDOUT,
    LASSO,
    RECYCLED,
    GaussianMeanModel,
    LinearModel,
    Tuning,
    check_model_data,
)
from .search import SearchConfig, dp_solve

log = logging.getLogger("cfcpd")

METHODS = ("in-ho", "in-cv", "cf-ho", "cf-cv", "cf-cv*")
_ALIASES = {"cf-cv-star": "cf-cv*", "cfcvstar": "cf-cv*"}
_PLAN = {
    "in-ho": (IN_SAMPLE, HOLDOUT),
    "in-cv": (IN_SAMPLE, CV),
    "cf-ho": (CROSSFIT, HOLDOUT),
    "cf-cv": (CROSSFIT, CV),
    "cf-cv*": (CROSSFIT_RECYCLED, RECYCLED),
}
MODEL_NAMES = ("gaussian-mean", "lasso-fixed", "lasso-cv", "ridgeless", "ls-selected",
               "classifier-knn")


class FlatLossWarning(UserWarning):
    """Every segmentation has the same loss, so the search result is arbitrary."""


def canonical_method(method):
    method = _ALIASES.get(method, method)
    if method not in _PLAN:
        raise InvalidConfigError(f"unknown method {method!r}; choose from {METHODS}")
    return method


def make_model(name, lam=None, k=None, grid_size=_lasso.DEFAULT_GRID_SIZE,
               grid_ratio=_lasso.DEFAULT_GRID_RATIO, selector="sis", k_grid=None):
    """Model factory keyed by the command-line model names."""
    grid = {"grid_size": grid_size, "grid_ratio": grid_ratio}
    if name == "gaussian-mean":
        return GaussianMeanModel()
    if name == "lasso-fixed":
        if lam is None:
            raise InvalidConfigError("lasso-fixed needs a lambda value")
        return LinearModel(LASSO, Tuning.fixed(lam, **grid))
    if name == "lasso-cv":
        return LinearModel(LASSO, Tuning.cv(**grid))
    if name == "ridgeless":
        return LinearModel("ridgeless")
    if name == "ls-selected":
        return LinearModel("ls-selected", selector=selector)
    if name == "classifier-knn":
        tuning = Tuning.fixed(k) if k else Tuning.recycled()
        return ClassifierLossModel(KnnClassifier(), tuning, k_grid)
    raise InvalidConfigError(f"unknown model {name!r}; choose from {MODEL_NAMES}")


def _tunable(model):
    t = getattr(model, "tuning", None)
    if t is None or t.kind == FIXED:
        return False
    return not isinstance(model, LinearModel) or model.fitter == LASSO


def resolve(model, method, M):
    """``(model, cost mode, needs_holdout)`` for a method name."""
    mode, kind = _PLAN[canonical_method(method)]
    if not _tunable(model):
        return model, (IN_SAMPLE if mode == IN_SAMPLE else CROSSFIT), False
    t = model.tuning
    grid = {"grid_size": t.grid_size, "grid_ratio": t.grid_ratio}
    if kind == CV:
        return model.with_tuning(Tuning.cv(B=M, **grid)), mode, False
    if kind == RECYCLED:
        return model.with_tuning(Tuning.recycled(B=M, **grid)), mode, False
    return model.with_tuning(Tuning.holdout(B=M, **grid)), mode, True


def build_coster(data, model, method, M=5, cache=None, tuning_value=None):
    """Memoised ``(s, e) -> cost`` for a method; hold-out methods need ``tuning_value``."""
    model, mode, needs = resolve(model, method, M)
    if needs:
        if tuning_value is None:
            raise InvalidConfigError(f"{method} needs a hold-out tuned value")
        model = model.with_tuning(model.tuning.with_value(tuning_value))
    folds = make_folds(data.n, M) if mode != IN_SAMPLE else None
    return SegmentCoster(model, data, mode, folds, cache)


def _half_config(config):
    return SearchConfig(config.mode, config.K, config.gamma / 2.0, max(1, config.d_m // 2),
                        max(1, config.candidate_stride // 2))


def odd_even_split(data):
    """Odd time indices (rows 0, 2, ...) train; even time indices hold out."""
    return data.subset(np.arange(0, data.n, 2)), data.subset(np.arange(1, data.n, 2))


def holdout_score(model, train, hold, segmentation):
    """Mean hold-out loss of segment-wise fits.

    Hold-out row ``r`` (time index ``2r + 2``) is predicted by the fit of the
    training-half segment containing training row ``r``.
    """
    total = 0.0
    for s, e in segmentation.segments():
        param = model.fit(train, np.arange(s, e), None)
        rows = np.arange(s, min(e, hold.n))
        if rows.size:
            total += model.loss(hold, param, rows)
    return total / hold.n


def tuning_grid(model, data):
    if isinstance(model, ClassifierLossModel):
        return [float(k) for k in model.grid_for(data.n)]
    t = model.tuning
    return list(_lasso.lambda_grid(data.X, data.y, G=t.grid_size, ratio=t.grid_ratio).values)


def holdout_tune_global(data, model, method, config, M=5, grid=None):
    """Choose one hyperparameter for all segments on an odd/even split.

    Returns ``(value, diagnostics)`` with one hold-out error per grid entry
    (``nan`` where detection failed).
    """
    if data.n < 4:
        raise InvalidConfigError("hold-out tuning needs n >= 4")
    model, mode, _ = resolve(model, method, M)
    train, hold = odd_even_split(data)
    grid = tuning_grid(model, train) if grid is None else [float(v) for v in grid]
    half = _half_config(config)
    errors = []
    for v in grid:
        mv = model.with_tuning(model.tuning.with_value(v))
        try:
            folds = make_folds(train.n, M) if mode != IN_SAMPLE else None
            res = dp_solve(SegmentCoster(mv, train, mode, folds), train.n, half)
            errors.append(holdout_score(mv, train, hold, res.segmentation))
        except CpdError as exc:
            log.info("hold-out candidate %g failed: %s", v, exc)
            errors.append(float("nan"))
    err = np.asarray(errors)
    if np.all(np.isnan(err)):
        raise TuningFailedError("every hold-out candidate failed")
    best = int(np.flatnonzero(err == np.nanmin(err))[0])
    return grid[best], {"grid": list(grid), "errors": errors, "best": best}


def detect(data, model, method="cf-cv", config=None, M=5, seed=None, cache=None,
           holdout_grid=None):
    """Run one detection method and return a :class:`DetectionResult`."""
    method = canonical_method(method)
    config = SearchConfig() if config is None else config
    check_model_data(model, data)
    t0 = time.perf_counter()
    resolved, mode, needs = resolve(model, method, M)
    value, diag = None, None
    if needs:
        value, diag = holdout_tune_global(data, model, method, config, M, holdout_grid)
    coster = build_coster(data, model, method, M, cache, value)
    if (isinstance(model, LinearModel) and model.fitter == "ridgeless" and mode == IN_SAMPLE
            and data.p >= data.n):
        msg = "ridgeless fits interpolate every segment when p >= n; all segmentations tie"
        warnings.warn(msg, FlatLossWarning, stacklevel=2)
        log.warning(msg)
    res = dp_solve(coster, data.n, config, method)
    res.config.update({"M": M, "seed": seed, "model": coster.model.tag, "cost_mode": mode})
    if value is not None:
        res.config["tuning_value"] = float(value)
        res.stats["holdout"] = diag
    res.stats["runtime_ms"] = 1000.0 * (time.perf_counter() - t0)
    return res


def _scoring_model(model, method, M, result):
    resolved, _, needs = resolve(model, method, M)
    if needs:
        return resolved.with_tuning(resolved.tuning.with_value(result.config["tuning_value"]))
    if getattr(resolved, "tuning", None) is not None and resolved.tuning.kind == RECYCLED:
        t = resolved.tuning
        return resolved.with_tuning(Tuning.cv(B=M, grid_size=t.grid_size, grid_ratio=t.grid_ratio))
    return resolved


def select_k_holdout(data, model, method, k_grid, d_m=1, M=5, candidate_stride=1):
    """Number of changepoints with the smallest hold-out error.

    Each ``K`` is detected on the odd half and scored on the even half; ties
    go to the smaller ``K``.
    """
    k_grid = sorted({int(k) for k in k_grid})
    if not k_grid:
        raise InvalidConfigError("k_grid is empty")
    train, hold = odd_even_split(data)
    scores = {}
    for K in k_grid:
        cfg = SearchConfig.fixed_k(K, max(1, d_m // 2), max(1, candidate_stride // 2))
        try:
            res = detect(train, model, method, cfg, M)
            scores[K] = holdout_score(_scoring_model(model, method, M, res), train, hold,
                                      res.segmentation)
        except CpdError as exc:
            log.info("K=%d failed on the hold-out split: %s", K, exc)
    if not scores:
        raise TuningFailedError("no candidate K could be evaluated")
    best = min(scores.values())
    return min(K for K, v in scores.items() if v == best)


class ChangepointDetector(BaseEstimator):
    """Changepoint detection by minimising in-sample or cross-fitted segment loss.

    Parameters
    ----------
    model : str, default="gaussian-mean"
        One of ``gaussian-mean``, ``lasso-fixed``, ``lasso-cv``, ``ridgeless``,
        ``ls-selected``, ``classifier-knn``.
    method : str, default="cf-cv"
        One of ``in-ho``, ``in-cv``, ``cf-ho``, ``cf-cv``, ``cf-cv*``.
    n_changepoints : int or None, default=1
        Fixed number of changepoints; ``None`` switches to penalised mode.
    penalty : float, default=0.0
        Per-changepoint penalty used when ``n_changepoints`` is None.
    min_segment_length : int or None
        Defaults to ``4 * n_folds``.
    n_folds : int, default=5
    candidate_stride : int, default=1
    lam, k : optional fixed lasso penalty / neighbour count.
    grid_size, grid_ratio : lasso lambda grid.

    Attributes
    ----------
    changepoints_ : ndarray of int
    n_changepoints_ : int
    segments_ : list of (s, e)
    total_loss_ : float
    result_ : DetectionResult
    """

    def __init__(self, model="gaussian-mean", method="cf-cv", n_changepoints=1, penalty=0.0,
                 min_segment_length=None, n_folds=5, candidate_stride=1, lam=None, k=None,
                 grid_size=_lasso.DEFAULT_GRID_SIZE, grid_ratio=_lasso.DEFAULT_GRID_RATIO):
        self.model = model
        self.method = method
        self.n_changepoints = n_changepoints
        self.penalty = penalty
        self.min_segment_length = min_segment_length
        self.n_folds = n_folds
        self.candidate_stride = candidate_stride
        self.lam = lam
        self.k = k
        self.grid_size = grid_size
        self.grid_ratio = grid_ratio

    def _config(self):
        d_m = self.min_segment_length or 4 * self.n_folds
        if self.n_changepoints is None:
            return SearchConfig.penalized(self.penalty, d_m, self.candidate_stride)
        return SearchConfig.fixed_k(self.n_changepoints, d_m, self.candidate_stride)

    def fit(self, X, y=None):
        if y is None:
            X = check_array(X, ensure_min_samples=2)
            data = Dataset(X, None, MULTIVARIATE)
        else:
            X, y = check_X_y(X, y, ensure_min_samples=2, y_numeric=True)
            data = Dataset(X, y, REGRESSION)
        model = make_model(self.model, self.lam, self.k, self.grid_size, self.grid_ratio)
        res = detect(data, model, self.method, self._config(), self.n_folds)
        self.result_ = res
        self.changepoints_ = np.asarray(res.taus, dtype=int)
        self.n_changepoints_ = len(res.taus)
        self.segments_ = res.segmentation.segments()
        self.total_loss_ = res.total_loss
        self.n_features_in_ = data.p
        return self

    def predict(self, X=None):
        """Segment label of every row of the fitted series."""
        check_is_fitted(self, "result_")
        n = self.result_.segmentation.n
        if X is not None and len(X) != n:
            raise ValueError(f"predict labels the fitted series of {n} rows, got {len(X)}")
        return self.result_.segmentation.labels()

    def fit_predict(self, X, y=None):
        return self.fit(X, y).predict()
