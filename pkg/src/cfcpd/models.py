"""Concrete loss models: Gaussian mean shift and linear regression fits."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import lasso as _lasso
from .core import CROSSFIT, CROSSFIT_RECYCLED, IN_SAMPLE, MULTIVARIATE, REGRESSION, SegmentCost
from .exceptions import DataError, InvalidConfigError, SegmentInfeasibleError

FIXED = "fixed"
CV = "cv"
HOLDOUT = "holdout"
RECYCLED = "recycled"


@dataclass(frozen=True)
class Tuning:
    """How a model's hyperparameter is chosen.

    ``fixed``
        use ``value`` everywhere;
    ``cv``
        B-fold order-preserving cross-validation inside each training set;
    ``holdout``
        one global value chosen on an odd/even split (resolved to ``fixed``
        before segment costs are computed);
    ``recycled``
        minimum over the grid of the cross-fitted loss itself.
    """

    kind: str = CV
    value: Optional[float] = None
    B: int = 5
    grid_size: int = _lasso.DEFAULT_GRID_SIZE
    grid_ratio: float = _lasso.DEFAULT_GRID_RATIO

    def __post_init__(self):
        if self.kind not in (FIXED, CV, HOLDOUT, RECYCLED):
            raise InvalidConfigError(f"unknown tuning kind {self.kind!r}")
        if self.kind == FIXED and (self.value is None or self.value < 0):
            raise InvalidConfigError("fixed tuning needs a value >= 0")
        if self.B < 2:
            raise InvalidConfigError(f"need B >= 2, got {self.B}")
        if self.grid_size < 2 or not 0 < self.grid_ratio < 1:
            raise InvalidConfigError("grid needs size >= 2 and 0 < ratio < 1")

    @classmethod
    def fixed(cls, value, **kw):
        return cls(FIXED, float(value), **kw)

    @classmethod
    def cv(cls, B=5, **kw):
        return cls(CV, None, B, **kw)

    @classmethod
    def holdout(cls, **kw):
        return cls(HOLDOUT, None, **kw)

    @classmethod
    def recycled(cls, **kw):
        return cls(RECYCLED, None, **kw)

    def with_value(self, value):
        return Tuning(FIXED, float(value), self.B, self.grid_size, self.grid_ratio)

    def describe(self):
        if self.kind == FIXED:
            return f"fixed({self.value:.6g})"
        if self.kind == CV:
            return f"cv(B={self.B},G={self.grid_size},r={self.grid_ratio:g})"
        return f"{self.kind}(G={self.grid_size},r={self.grid_ratio:g})"


class GaussianMeanModel:
    """Squared loss around a per-coordinate mean: ``sum_i ||z_i - f||^2``."""

    tag = "gaussian-mean"

    def min_fit_size(self, M=None):
        return 1

    def _Z(self, data):
        return data.covariates

    def fit(self, data, train, scope=None):
        if len(train) == 0:
            raise SegmentInfeasibleError("empty training set")
        return self._Z(data)[train].mean(axis=0)

    def loss(self, data, param, rows):
        d = self._Z(data)[rows] - param
        return float(np.sum(d * d))

    # prefix sums make every interval O(p); checked against the generic route in tests
    def _prefix(self, data, M):
        key = (id(data), M)
        cached = getattr(self, "_prefix_cache", None)
        if cached is not None and cached[0] == key:
            return cached[1]
        Z = self._Z(data)
        n = Z.shape[0]
        pad = np.vstack([np.zeros((1, Z.shape[1])), Z])
        sq = np.concatenate([[0.0], np.sum(Z * Z, axis=1)])
        cls_s = np.zeros((M, n + 1, Z.shape[1]))
        cls_q = np.zeros((M, n + 1))
        cls_n = np.zeros((M, n + 1))
        for m in range(M):
            mask = np.concatenate([[False], (np.arange(n) % M) == m])
            cls_s[m] = np.cumsum(np.where(mask[:, None], pad, 0.0), axis=0)
            cls_q[m] = np.cumsum(np.where(mask, sq, 0.0))
            cls_n[m] = np.cumsum(mask)
        out = (cls_s, cls_q, cls_n)
        self._prefix_cache = (key, out)
        return out

    def fast_cost(self, data, interval, mode, folds):
        if mode == CROSSFIT_RECYCLED:
            return None
        s, e = int(interval[0]), int(interval[1])
        if not 0 <= s < e <= data.n:
            return None
        M = folds.M if folds is not None else 2
        S, Q, N = self._prefix(data, M)
        sums = S[:, e] - S[:, s]
        sq = Q[:, e] - Q[:, s]
        cnt = N[:, e] - N[:, s]
        if mode == IN_SAMPLE:
            tot = sums.sum(axis=0)
            value = sq.sum() - tot @ tot / (e - s)
            return SegmentCost((s, e), float(max(value, 0.0)), IN_SAMPLE, self.tag)
        # sum over J_m of ||z - mean_{I \ J_m}||^2, expanded
        terms = np.zeros(M)
        all_s, all_n = sums.sum(axis=0), cnt.sum()
        for m in range(M):
            if cnt[m] == 0:
                continue
            nt = all_n - cnt[m]
            if nt < 1:
                raise SegmentInfeasibleError("empty training set", (s, e))
            mu = (all_s - sums[m]) / nt
            terms[m] = sq[m] - 2.0 * sums[m] @ mu + cnt[m] * (mu @ mu)
        return SegmentCost((s, e), float(terms.sum()), CROSSFIT, self.tag, {"fold_terms": terms})


LASSO = "lasso"
RIDGELESS = "ridgeless"
LS_SELECTED = "ls-selected"


class LinearModel:
    """Squared-error regression loss ``sum_i (y_i - x_i'f)^2`` with a choice of fitter.

    Parameters
    ----------
    fitter : {"lasso", "ridgeless", "ls-selected"}
    tuning : Tuning, optional
        Lambda rule for the lasso; ignored by the other fitters.
    selector : {"sis", "lasso-cv"} or int, default="sis"
        Variable selection for ``ls-selected``.  ``"sis"`` keeps the
        ``floor(m / log m)`` columns with the largest marginal correlation, an
        int keeps that many, ``"lasso-cv"`` keeps the cross-validated lasso
        support.
    standardize : bool, default=False
        Passed to the lasso fits.
    """

    def __init__(self, fitter=LASSO, tuning=None, selector="sis", standardize=False):
        if fitter not in (LASSO, RIDGELESS, LS_SELECTED):
            raise InvalidConfigError(f"unknown linear fitter {fitter!r}")
        self.fitter = fitter
        self.tuning = Tuning.cv() if tuning is None else tuning
        self.selector = selector
        self.standardize = standardize
        self.n_fits = 0

    @property
    def tag(self):
        if self.fitter == LASSO:
            return f"lasso-{self.tuning.describe()}"
        if self.fitter == LS_SELECTED:
            return f"ls-selected({self.selector})"
        return "ridgeless"

    def with_tuning(self, tuning):
        return LinearModel(self.fitter, tuning, self.selector, self.standardize)

    def min_fit_size(self, M=None):
        if self.fitter == RIDGELESS:
            return 2
        if self.fitter == LASSO and self.tuning.kind == FIXED:
            return 2
        return 2 * (M if M is not None else self.tuning.B)

    @staticmethod
    def _xy(data, rows):
        if data.kind != REGRESSION:
            raise DataError("linear models need a regression dataset")
        return data.X[rows], data.y[rows]

    def _grid(self, c, m):
        return _lasso.grid_from_gram(c, m, self.tuning.grid_size, self.tuning.grid_ratio).values

    def _lasso_at(self, X, y, lam, Gc=None):
        G, c = Gc if Gc is not None else (X.T @ X, X.T @ y)
        m = X.shape[0]
        lmax = _lasso.lambda_max_from(c, m)
        if lam >= lmax:
            return np.zeros(X.shape[1])
        # short warm path from lambda_max; same minimiser, far fewer sweeps
        lams = np.append(np.geomspace(lmax, lam, 8)[:-1], lam)
        return _lasso.lasso_path_gram(G, c, m, lams)[-1]

    def _lasso_cv(self, X, y):
        m = X.shape[0]
        G, c = X.T @ X, X.T @ y
        grid = self._grid(c, m)
        if grid.size == 1:
            return np.zeros(X.shape[1])
        losses = _lasso.cv_losses_gram(X, y, grid, self.tuning.B, G=G, c=c)
        return self._refit_best(G, c, m, grid, losses)

    @staticmethod
    def _refit_best(G, c, m, grid, losses):
        g = _lasso.argmin_larger_lambda(grid, losses)
        return _lasso.lasso_path_gram(G, c, m, grid[: g + 1])[-1]

    def fit(self, data, train, scope=None):
        X, y = self._xy(data, train)
        self.n_fits += 1
        if self.fitter == RIDGELESS:
            return _lasso.ridgeless_fit(X, y).coefficients
        if self.fitter == LS_SELECTED:
            return _lasso.ls_on_selected(X, y, self._select(X, y)).coefficients
        kind = self.tuning.kind
        if kind == FIXED:
            if self.standardize:
                return _lasso.lasso_fit(X, y, self.tuning.value, standardize=True).coefficients
            return self._lasso_at(X, y, self.tuning.value)
        if kind == CV:
            return self._lasso_cv(X, y)
        raise InvalidConfigError(
            f"lasso tuning {kind!r} must be resolved (holdout) or used in recycled mode")

    def _select(self, X, y):
        m = X.shape[0]
        if self.selector == "lasso-cv":
            return np.flatnonzero(self._lasso_cv(X, y))
        if self.selector == "sis":
            d = int(np.floor(m / np.log(m))) if m > 2 else 1
        else:
            d = int(self.selector)
        return _lasso.screen_top(X, y, min(d, m - 1))

    def loss(self, data, param, rows):
        X, y = self._xy(data, rows)
        r = y - X @ param
        return float(r @ r)

    # recycled cross-validation over the lasso grid of the full segment
    def candidates(self, data, rows):
        if self.fitter != LASSO:
            raise InvalidConfigError("recycled tuning needs the lasso fitter")
        X, y = self._xy(data, rows)
        return self._grid(X.T @ y, X.shape[0])

    def fit_path(self, data, train, cands, scope=None):
        X, y = self._xy(data, train)
        self.n_fits += len(cands)
        G, c = X.T @ X, X.T @ y
        return list(_lasso.lasso_path_gram(G, c, X.shape[0], cands))

    def coefficients(self, data, rows):
        """Fitted coefficients on ``rows`` (for prediction / diagnostics)."""
        return self.fit(data, np.asarray(rows), None)


def gaussian_mean_model():
    return GaussianMeanModel()


def linear_model(fitter=LASSO, tuning=None, **kw):
    return LinearModel(fitter, tuning, **kw)


def check_model_data(model, data):
    if isinstance(model, LinearModel) and data.kind != REGRESSION:
        raise DataError("linear models need regression data")
    if isinstance(model, GaussianMeanModel) and data.kind != MULTIVARIATE:
        raise DataError("the Gaussian mean model needs multivariate data")
