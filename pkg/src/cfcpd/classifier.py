"""Classifier-based nonparametric segment loss.

For a segment ``T`` inside a scope ``S`` of rows, a probabilistic classifier
is trained on all of ``S`` with label 1 on ``T`` and 0 elsewhere.  The fitted
likelihood ratio is ``f(z) = |S| / |T| * p(z)`` and the loss of a row is
``-log f(z)``.  Probabilities are clipped to ``[eps, 1 - eps]`` with
``eps = 1 / (2n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.spatial.distance import cdist

from .core import CROSSFIT, CROSSFIT_RECYCLED, IN_SAMPLE, MULTIVARIATE, SegmentCost
from .exceptions import DataError, InvalidConfigError, SegmentInfeasibleError
from .models import CV, FIXED, HOLDOUT, RECYCLED, Tuning


def default_k(n):
    return int(math.ceil(math.sqrt(n)))


def default_k_grid(n):
    k = default_k(n)
    return sorted({max(1, int(math.ceil(math.sqrt(n) / 2))), k, 2 * k}, reverse=True)


@dataclass(frozen=True)
class KnnClassifierConfig:
    k: int = 0
    k_grid: tuple = ()

    def __post_init__(self):
        if self.k < 0 or any(int(v) < 1 for v in self.k_grid):
            raise InvalidConfigError("k values must be >= 1 (0 selects the default)")


class _KnnFit:
    __slots__ = ("Z", "labels", "k")

    def __init__(self, Z, labels, k):
        self.Z, self.labels, self.k = Z, labels, k


class KnnClassifier:
    """k-nearest-neighbour class-1 frequency with Euclidean distance.

    Ties in distance are broken by the lower training row index.  ``k`` is
    clamped to the training size.
    """

    def __init__(self, k=None):
        self.k = k

    def train(self, Z, labels, k=None):
        Z = np.asarray(Z, dtype=float)
        labels = np.asarray(labels, dtype=float)
        if Z.shape[0] == 0:
            raise SegmentInfeasibleError("empty training set for the classifier")
        k = self.k if k is None else k
        k = default_k(Z.shape[0]) if not k else int(k)
        return _KnnFit(Z, labels, min(k, Z.shape[0]))

    def predict_proba(self, fitted, Zq):
        D = cdist(np.atleast_2d(Zq), fitted.Z, "sqeuclidean")
        idx = np.argsort(D, axis=1, kind="stable")[:, : fitted.k]
        return fitted.labels[idx].mean(axis=1)


def knn_classifier(config=None):
    config = config or KnnClassifierConfig()
    return KnnClassifier(config.k or None)


# ------------------------------------------------------------ neighbour kernel


@njit(cache=True)
def _excluded(r, M, skip, vs, ve, vB, vb):
    if skip >= 0 and r % M == skip:
        return True
    if vB > 0 and vs <= r < ve:
        # position of r inside the training rows [vs, ve) minus class `skip`
        pos = r - vs
        if skip >= 0:
            pos -= (r - skip + M - 1) // M - (vs - skip + M - 1) // M
        if pos % vB == vb:
            return True
    return False


@njit(cache=True)
def _knn_losses(order, queries, ks, s, e, M, skip, vB, vb, scale, eps):
    """Summed ``-log(scale * clip(p))`` over the queries, one value per k.

    A query's admissible neighbours are scanned in distance order; positives
    are admissible rows in ``[s, e)``.  ``k`` is clamped to the number of
    admissible rows.  Returns ``nan`` when a query has no admissible neighbour.
    """
    nq = queries.shape[0]
    n = order.shape[1]
    G = ks.shape[0]
    kmax = 0
    for g in range(G):
        kmax = max(kmax, ks[g])
    cum = np.zeros(kmax, dtype=np.int64)
    out = np.zeros(G)
    for a in range(nq):
        row = order[queries[a]]
        found = 0
        pos = 0
        for t in range(n):
            r = row[t]
            if _excluded(r, M, skip, s, e, vB, vb):
                continue
            if s <= r < e:
                pos += 1
            cum[found] = pos
            found += 1
            if found == kmax:
                break
        if found == 0:
            out[:] = np.nan
            return out
        for g in range(G):
            k = min(ks[g], found)
            p = cum[k - 1] / k
            p = min(max(p, eps), 1.0 - eps)
            out[g] -= np.log(scale * p)
    return out


class ClassifierLossModel:
    """Nonparametric loss built on a probabilistic classifier.

    Parameters
    ----------
    classifier : object, optional
        Implements ``train(Z, labels, k)`` and ``predict_proba(fitted, Z)``;
        defaults to :class:`KnnClassifier`.
    tuning : Tuning, optional
        Rule for choosing ``k``; ``Tuning.fixed(k)``, ``Tuning.cv(B)``,
        ``Tuning.recycled()`` or ``Tuning.holdout()``.
    k_grid : sequence of int, optional
        Candidate neighbour counts; defaults to
        ``{ceil(sqrt(n)/2), ceil(sqrt(n)), 2 ceil(sqrt(n))}``.
    """

    def __init__(self, classifier=None, tuning=None, k_grid=None):
        self.classifier = classifier or KnnClassifier()
        self.tuning = tuning if tuning is not None else Tuning.recycled()
        self.k_grid = None if k_grid is None else sorted({int(k) for k in k_grid}, reverse=True)
        self._order = None

    @property
    def tag(self):
        grid = "auto" if self.k_grid is None else ",".join(map(str, self.k_grid))
        t = self.tuning
        rule = f"fixed({int(t.value)})" if t.kind == FIXED else f"{t.kind}(B={t.B})"
        return f"classifier-knn[{grid}]-{rule}"

    def with_tuning(self, tuning):
        return ClassifierLossModel(self.classifier, tuning, self.k_grid)

    def min_fit_size(self, M=None):
        if self.tuning.kind == FIXED:
            return 1
        return 2 * (M if M is not None else self.tuning.B)

    def grid_for(self, n):
        return list(self.k_grid) if self.k_grid is not None else default_k_grid(n)

    # -------------------------------------------------------- generic contract

    def _fit_k(self, data, train, scope, k):
        if data.kind != MULTIVARIATE:
            raise DataError("the classifier loss needs multivariate data")
        scope = np.arange(data.n) if scope is None else np.asarray(scope)
        train = np.asarray(train)
        labels = np.isin(scope, train)
        nt, ns = int(labels.sum()), scope.size
        if nt == 0 or nt == ns or nt != train.size:
            raise SegmentInfeasibleError(f"degenerate classification: {nt} of {ns} rows labelled 1")
        fitted = self.classifier.train(data.X[scope], labels.astype(float), k)
        return fitted, ns / nt, 1.0 / (2 * data.n)

    def fit(self, data, train, scope=None):
        t = self.tuning
        if t.kind == FIXED:
            return self._fit_k(data, train, scope, int(t.value))
        if t.kind == CV:
            return self._fit_k(data, train, scope, self._cv_k(data, train, scope))
        raise InvalidConfigError(f"k tuning {t.kind!r} must be resolved before fitting")

    def _cv_k(self, data, train, scope):
        scope = np.arange(data.n) if scope is None else np.asarray(scope)
        train = np.asarray(train)
        B = self.tuning.B
        lab = np.arange(train.size) % B
        ks = self.grid_for(data.n)
        tot = np.zeros(len(ks))
        for b in range(B):
            val = train[lab == b]
            if val.size == 0:
                continue
            inner_scope = np.setdiff1d(scope, val)
            inner_train = train[lab != b]
            for g, k in enumerate(ks):
                tot[g] += self.loss(data, self._fit_k(data, inner_train, inner_scope, k), val)
        return ks[int(np.flatnonzero(tot == tot.min())[0])]

    def loss(self, data, param, rows):
        fitted, scale, eps = param
        p = np.clip(self.classifier.predict_proba(fitted, data.X[rows]), eps, 1.0 - eps)
        return float(-np.sum(np.log(scale * p)))

    def candidates(self, data, rows):
        return self.grid_for(data.n)

    def fit_path(self, data, train, cands, scope=None):
        return [self._fit_k(data, train, scope, k) for k in cands]

    # ----------------------------------------------------------- fast kernels

    def _neighbour_order(self, data):
        if self._order is None or self._order[0] is not data:
            D = cdist(data.X, data.X, "sqeuclidean")
            self._order = (data, np.argsort(D, axis=1, kind="stable").astype(np.int64))
        return self._order[1]

    def _usable_fast(self):
        return isinstance(self.classifier, KnnClassifier)

    def _term(self, data, order, queries, s, e, M, skip, vB, vb, ks, n_scope, n_train):
        if queries.size == 0:
            return np.zeros(len(ks))
        if n_train == 0 or n_train == n_scope:
            raise SegmentInfeasibleError(f"degenerate classification on ({s}, {e}]", (s, e))
        out = _knn_losses(order, queries.astype(np.int64), np.asarray(ks, dtype=np.int64),
                          s, e, M, skip, vB, vb, n_scope / n_train, 1.0 / (2 * data.n))
        if np.isnan(out[0]):
            raise SegmentInfeasibleError(f"no admissible neighbours on ({s}, {e}]", (s, e))
        return out

    def _cv_terms(self, data, order, s, e, M, skip, B, ks, n_scope, train_rows):
        # inner B-fold CV inside the training rows, validation removed from scope
        tot = np.zeros(len(ks))
        pos = np.arange(train_rows.size)
        for b in range(B):
            val = train_rows[pos % B == b]
            if val.size == 0:
                continue
            tot += self._term(data, order, val, s, e, M, skip, B, b, ks,
                              n_scope - val.size, train_rows.size - val.size)
        return tot

    def fast_cost(self, data, interval, mode, folds):
        if not self._usable_fast() or data.kind != MULTIVARIATE:
            return None
        t = self.tuning
        if t.kind == HOLDOUT:
            return None
        s, e = int(interval[0]), int(interval[1])
        n = data.n
        order = self._neighbour_order(data)
        ks = self.grid_for(n)
        M = folds.M if folds is not None else t.B
        rows = np.arange(s, e)

        def need(size, m_arg):
            if size < self.min_fit_size(m_arg):
                raise SegmentInfeasibleError(f"segment ({s}, {e}] too short", (s, e))

        def k_for(train_rows, n_scope, skip):
            if t.kind == FIXED:
                return int(t.value)
            tot = self._cv_terms(data, order, s, e, M, skip, t.B, ks, n_scope, train_rows)
            return ks[int(np.flatnonzero(tot == tot.min())[0])]

        if mode == IN_SAMPLE:
            if t.kind == RECYCLED:
                return None
            need(e - s, None)
            k = k_for(rows, n, -1)
            v = self._term(data, order, rows, s, e, M, -1, 0, 0, [k], n, e - s)[0]
            return SegmentCost((s, e), float(v), IN_SAMPLE, self.tag, {"k": k})
        if mode == CROSSFIT_RECYCLED:
            table = np.zeros((M, len(ks)))
            for m in range(M):
                ev = rows[rows % M == m]
                if ev.size == 0:
                    continue
                train = rows[rows % M != m]
                need(train.size, M)
                n_scope = n - len(range(m, n, M))
                table[m] = self._term(data, order, ev, s, e, M, m, 0, 0, ks, n_scope, train.size)
            totals = table.sum(axis=0)
            g = int(np.flatnonzero(totals == totals.min())[0])
            return SegmentCost((s, e), float(totals[g]), CROSSFIT_RECYCLED, self.tag,
                               {"candidates": np.asarray(ks), "totals": totals, "best": g})
        if mode == CROSSFIT:
            if t.kind == RECYCLED:
                return None
            terms = np.zeros(M)
            for m in range(M):
                ev = rows[rows % M == m]
                if ev.size == 0:
                    continue
                train = rows[rows % M != m]
                n_scope = n - len(range(m, n, M))
                need(train.size, M)
                k = k_for(train, n_scope, m)
                terms[m] = self._term(data, order, ev, s, e, M, m, 0, 0, [k], n_scope, train.size)[0]
            return SegmentCost((s, e), float(terms.sum()), CROSSFIT, self.tag, {"fold_terms": terms})
        return None


def classifier_loss_model(clf=None, tuning=None, k_grid=None):
    return ClassifierLossModel(clf, tuning, k_grid)
