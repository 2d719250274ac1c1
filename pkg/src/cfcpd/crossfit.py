"""Fold plans and segment costs: in-sample, cross-fitted and recycled.

A loss model is any object with

``tag``
    string identifying the model and its tuning rule;
``min_fit_size(M)``
    smallest training set the model accepts;
``fit(data, train, scope=None)``
    parameter fitted on the 0-based rows ``train``.  ``scope`` is the set of
    rows the model may look at as unlabelled context (only the classifier
    loss uses it); it never contains evaluation rows;
``loss(data, param, rows)``
    summed pointwise loss over ``rows``.

Models that support recycled cross-validation also provide
``candidates(data, rows)`` and ``fit_path(data, train, candidates, scope)``.
"""

from __future__ import annotations

import threading

import numpy as np

from .core import (
    CROSSFIT,
    CROSSFIT_RECYCLED,
    IN_SAMPLE,
    FoldPlan,
    SegmentCost,
)
from .exceptions import InvalidConfigError, SegmentInfeasibleError


def make_folds(n: int, M: int) -> FoldPlan:
    """Order-preserving folds ``J_m = {i : (i - 1) mod M = m - 1}``."""
    n, M = int(n), int(M)
    if M < 2 or M > n:
        raise InvalidConfigError(f"need 2 <= M <= n, got M={M}, n={n}")
    return FoldPlan(M, n)


def _check_interval(data, interval):
    s, e = int(interval[0]), int(interval[1])
    if not 0 <= s < e <= data.n:
        raise InvalidConfigError(f"interval ({s}, {e}] outside (0, {data.n}]")
    return s, e


def _need(model, size, interval, M=None):
    need = model.min_fit_size(M)
    if size < need:
        raise SegmentInfeasibleError(
            f"{model.tag}: {size} training rows < minimum {need} on ({interval[0]}, {interval[1]}]",
            interval,
        )


def _complement(n, rows):
    keep = np.ones(n, dtype=bool)
    keep[rows] = False
    return np.flatnonzero(keep)


def in_sample_cost(model, data, interval) -> SegmentCost:
    """Loss of the model fitted on ``(s, e]`` and scored on the same rows."""
    s, e = _check_interval(data, interval)
    rows = np.arange(s, e)
    _need(model, rows.size, (s, e))
    param = model.fit(data, rows, None)
    return SegmentCost((s, e), float(model.loss(data, param, rows)), IN_SAMPLE, model.tag)


def _fold_split(data, folds, s, e, m):
    ev = folds.members_in(m, s, e)
    rows = np.arange(s, e)
    train = rows[(rows % folds.M) != (m - 1)]
    return ev, train


def crossfit_terms(model, data, interval, folds):
    """Per-fold terms ``L(z_{I∩J_m}; f_{I\\J_m})``; folds with ``I∩J_m = ∅`` give 0."""
    s, e = _check_interval(data, interval)
    terms = np.zeros(folds.M)
    for m in range(1, folds.M + 1):
        ev, train = _fold_split(data, folds, s, e, m)
        if ev.size == 0:
            continue
        _need(model, train.size, (s, e), folds.M)
        param = model.fit(data, train, _complement(data.n, folds.members(m)))
        terms[m - 1] = model.loss(data, param, ev)
    return terms


def crossfit_cost(model, data, interval, folds) -> SegmentCost:
    """Cross-fitted loss ``sum_m L(z_{I∩J_m}; f_{I\\J_m})``."""
    terms = crossfit_terms(model, data, interval, folds)
    return SegmentCost(tuple(map(int, interval)), float(terms.sum()), CROSSFIT, model.tag,
                       {"fold_terms": terms})


def recycled_table(model, data, interval, folds):
    """``(candidates, table)`` with ``table[m - 1, g]`` the fold-``m`` loss of candidate ``g``."""
    s, e = _check_interval(data, interval)
    cands = model.candidates(data, np.arange(s, e))
    table = np.zeros((folds.M, len(cands)))
    for m in range(1, folds.M + 1):
        ev, train = _fold_split(data, folds, s, e, m)
        if ev.size == 0:
            continue
        _need(model, train.size, (s, e), folds.M)
        params = model.fit_path(data, train, cands, _complement(data.n, folds.members(m)))
        for g, param in enumerate(params):
            table[m - 1, g] = model.loss(data, param, ev)
    return cands, table


def best_candidate(cands, totals):
    """Index of the smallest total; ties go to the most regularised candidate.

    Candidate lists are ordered from most to least regularised, so ties
    resolve to the earliest index.
    """
    totals = np.asarray(totals)
    return int(np.flatnonzero(totals == totals.min())[0])


def crossfit_cost_recycled(model, data, interval, folds) -> SegmentCost:
    """``min_lambda sum_m L(z_{I∩J_m}; f_{I\\J_m}(lambda))`` using ``M * |grid|`` fits."""
    cands, table = recycled_table(model, data, interval, folds)
    totals = table.sum(axis=0)
    g = best_candidate(cands, totals)
    return SegmentCost(tuple(map(int, interval)), float(totals[g]), CROSSFIT_RECYCLED,
                       model.tag, {"candidates": np.asarray(cands), "totals": totals, "best": g})


_GENERIC = {
    IN_SAMPLE: lambda model, data, iv, folds: in_sample_cost(model, data, iv),
    CROSSFIT: crossfit_cost,
    CROSSFIT_RECYCLED: crossfit_cost_recycled,
}


def segment_cost(model, data, interval, mode, folds=None) -> SegmentCost:
    """Dispatch to the model's fast path when it has one, else the generic route."""
    if mode not in _GENERIC:
        raise InvalidConfigError(f"unknown cost mode {mode!r}")
    if mode != IN_SAMPLE and folds is None:
        raise InvalidConfigError(f"mode {mode!r} needs a fold plan")
    fast = getattr(model, "fast_cost", None)
    if fast is not None:
        out = fast(data, interval, mode, folds)
        if out is not None:
            return out
    return _GENERIC[mode](model, data, interval, folds)


class CostCache:
    """Memo of segment costs keyed by ``(s, e, mode, model_tag)``.

    Values are deterministic, so concurrent inserts of the same key are
    harmless; the lock only protects the counters.
    """

    def __init__(self):
        self._store = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def __len__(self):
        return len(self._store)

    def __contains__(self, key):
        return key in self._store

    def get_or_compute(self, key, compute):
        try:
            value = self._store[key]
        except KeyError:
            value = compute()
            with self._lock:
                self.misses += 1
            self._store[key] = value
            return value
        with self._lock:
            self.hits += 1
        return value


class SegmentCoster:
    """Callable ``(s, e) -> cost`` for one model, dataset and mode, with memoisation."""

    def __init__(self, model, data, mode, folds=None, cache=None):
        if mode != IN_SAMPLE and folds is None:
            folds = make_folds(data.n, 5)
        self.model = model
        self.data = data
        self.mode = mode
        self.folds = folds
        self.cache = CostCache() if cache is None else cache

    def cost(self, s, e) -> SegmentCost:
        key = (int(s), int(e), self.mode, self.model.tag)
        return self.cache.get_or_compute(
            key, lambda: segment_cost(self.model, self.data, (s, e), self.mode, self.folds))

    def __call__(self, s, e) -> float:
        return self.cost(s, e).value
