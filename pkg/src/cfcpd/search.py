"""Exact segmentation search by dynamic programming, and a brute-force oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .core import DetectionResult, SegmentCost, Segmentation
from .exceptions import (
    EnumerationLimitError,
    InvalidConfigError,
    SegmentInfeasibleError,
)

FIXED_K = "fixed_K"
PENALIZED = "penalized"
ENUMERATION_LIMIT = 10**6


@dataclass(frozen=True)
class SearchConfig:
    """What to minimise and over which segmentations.

    Parameters
    ----------
    mode : {"fixed_K", "penalized"}
    K : int
        Number of changepoints in ``fixed_K`` mode.
    gamma : float
        Per-changepoint penalty in ``penalized`` mode.
    d_m : int
        Minimum segment length.
    candidate_stride : int
        Inner boundaries are restricted to multiples of the stride.  1 gives
        the complete search; larger values are an approximation.
    """

    mode: str = FIXED_K
    K: int = 1
    gamma: float = 0.0
    d_m: int = 1
    candidate_stride: int = 1

    def __post_init__(self):
        if self.mode not in (FIXED_K, PENALIZED):
            raise InvalidConfigError(f"unknown search mode {self.mode!r}")
        if int(self.d_m) < 1:
            raise InvalidConfigError(f"d_m must be >= 1, got {self.d_m}")
        if int(self.K) < 0:
            raise InvalidConfigError(f"K must be >= 0, got {self.K}")
        if not (self.gamma >= 0 and math.isfinite(self.gamma)):
            raise InvalidConfigError(f"gamma must be finite and >= 0, got {self.gamma}")
        if int(self.candidate_stride) < 1:
            raise InvalidConfigError("candidate_stride must be >= 1")

    @classmethod
    def fixed_k(cls, K, d_m=1, candidate_stride=1):
        return cls(FIXED_K, int(K), 0.0, int(d_m), int(candidate_stride))

    @classmethod
    def penalized(cls, gamma, d_m=1, candidate_stride=1):
        return cls(PENALIZED, 0, float(gamma), int(d_m), int(candidate_stride))

    @property
    def penalty(self):
        return self.gamma if self.mode == PENALIZED else 0.0

    def snapshot(self):
        out = {"mode": self.mode, "d_m": self.d_m, "candidate_stride": self.candidate_stride}
        if self.mode == FIXED_K:
            out["K"] = self.K
        else:
            out["gamma"] = self.gamma
        return out

    def check(self, n):
        if self.mode == FIXED_K and (self.K + 1) * self.d_m > n:
            raise InvalidConfigError(
                f"infeasible: (K + 1) * d_m = {(self.K + 1) * self.d_m} > n = {n}")
        if self.mode == PENALIZED and self.d_m > n:
            raise InvalidConfigError(f"infeasible: d_m = {self.d_m} > n = {n}")


class _CountingCost:
    """Memoised view of the cost; infeasible intervals become ``inf``."""

    def __init__(self, cost):
        self.cost = cost
        self.memo = {}
        self.calls = 0
        self.evaluations = 0

    def __call__(self, s, e):
        self.calls += 1
        v = self.memo.get((s, e))
        if v is None:
            self.evaluations += 1
            try:
                v = float(self.cost(s, e))
            except SegmentInfeasibleError:
                v = math.inf
            self.memo[(s, e)] = v
        return v


def _boundaries(n, stride):
    inner = list(range(stride, n, stride))
    return [0] + inner + [n]


def _link(c, gamma, rest, e, n):
    # c + (gamma + rest) for inner boundaries, c alone for the last segment;
    # the brute-force oracle uses exactly the same association
    return c if e == n else c + (gamma + rest)


def _result(cost, memo, taus, n, config, stats, method=""):
    seg = Segmentation(taus, n)
    per = []
    for s, e in seg.segments():
        if hasattr(cost, "cost"):
            per.append(cost.cost(s, e))
        else:
            per.append(SegmentCost((s, e), memo[(s, e)], "callable", "callable"))
    total = sum(c.value for c in per) + config.penalty * len(taus)
    return DetectionResult(seg, float(total), per, method, config.snapshot(), stats)


def dp_solve(cost, n: int, config: SearchConfig, method: str = "") -> DetectionResult:
    """Minimise the total segment cost exactly.

    ``cost(s, e)`` returns the cost of ``(s, e]``.  Each interval is evaluated
    at most once.  On ties the segmentation with the lexicographically
    smallest boundary sequence ``(tau_1, ..., tau_K, n)`` is returned.
    Intervals whose cost raises :class:`SegmentInfeasibleError` are skipped.
    """
    n = int(n)
    config.check(n)
    c = _CountingCost(cost)
    bd = _boundaries(n, config.candidate_stride)
    d = config.d_m
    inf = math.inf

    if config.mode == FIXED_K:
        K = config.K
        # V[s]: best cost of (s, n] split into r segments; backwards in r
        def starts(r):
            # a start point with r segments left follows K + 1 - r earlier ones
            if r == K + 1:
                return [0]
            return [s for s in bd[1:-1] if s >= (K + 1 - r) * d and n - s >= r * d]

        V = {s: c(s, n) for s in starts(1)}
        nxt = {}
        for r in range(2, K + 2):
            W, arg = {}, {}
            for s in starts(r):
                best, best_e = inf, None
                for e, rest in V.items():
                    if e - s < d or rest == inf:
                        continue
                    v = _link(c(s, e), 0.0, rest, e, n)
                    if v < best:
                        best, best_e = v, e
                W[s], arg[s] = best, best_e
            V = dict(sorted(W.items()))
            nxt[r] = arg
        objective = V.get(0, inf)
        if objective == inf:
            raise SegmentInfeasibleError("no admissible segmentation with finite cost")
        taus, s = [], 0
        for r in range(K + 1, 1, -1):
            s = nxt[r][s]
            taus.append(s)
    else:
        gamma = config.gamma
        V = {n: 0.0}
        arg = {}
        for s in reversed(bd[:-1]):
            best, best_e = inf, None
            for e in bd:
                if e - s < d:
                    continue
                rest = V.get(e, inf)
                if rest == inf:
                    continue
                v = _link(c(s, e), gamma, rest, e, n)
                if v < best:
                    best, best_e = v, e
            if best_e is not None:
                V[s], arg[s] = best, best_e
        objective = V.get(0, inf)
        if objective == inf:
            raise SegmentInfeasibleError("no admissible segmentation with finite cost")
        taus, s = [], 0
        while arg[s] != n:
            s = arg[s]
            taus.append(s)

    stats = {"objective": objective, "cost_evaluations": c.evaluations, "cost_requests": c.calls}
    return _result(cost, c.memo, taus, n, config, stats, method)


def count_segmentations(n, config) -> int:
    """Number of admissible segmentations under ``config``."""
    bd = _boundaries(n, config.candidate_stride)
    d = config.d_m
    if config.mode == FIXED_K:
        ways = {s: int(n - s >= d) for s in bd[:-1]}
        for _ in range(config.K):
            ways = {s: sum(w for e, w in ways.items() if e - s >= d) for s in bd[:-1]}
        return ways.get(0, 0)
    ways = {n: 1}
    for s in reversed(bd[:-1]):
        ways[s] = sum(w for e, w in ways.items() if e - s >= d)
    return ways[0]


def _enumerate(bd, n, d, k_left):
    # boundary sequences (..., n) in lexicographic order
    def rec(s, k):
        for e in bd:
            if e - s < d:
                continue
            if e == n:
                if k is None or k == 0:
                    yield (n,)
            elif k is None or k > 0:
                for tail in rec(e, None if k is None else k - 1):
                    yield (e,) + tail
    return rec(0, k_left)


def brute_force_solve(cost, n: int, config: SearchConfig, limit: int = ENUMERATION_LIMIT,
                      method: str = "") -> DetectionResult:
    """Exhaustive search with the same objective and tie rule as :func:`dp_solve`."""
    n = int(n)
    config.check(n)
    count = count_segmentations(n, config)
    if count > limit:
        raise EnumerationLimitError(f"{count} segmentations exceed the limit {limit}")
    c = _CountingCost(cost)
    bd = _boundaries(n, config.candidate_stride)
    k = config.K if config.mode == FIXED_K else None
    gamma = config.penalty
    best, best_b = math.inf, None
    for b in _enumerate(bd, n, config.d_m, k):
        starts = (0,) + b[:-1]
        costs = [c(s, e) for s, e in zip(starts, b)]
        total = costs[-1]
        for v in reversed(costs[:-1]):
            total = v + (gamma + total)
        if total < best:
            best, best_b = total, b
    if best_b is None:
        raise SegmentInfeasibleError("no admissible segmentation with finite cost")
    stats = {"objective": best, "cost_evaluations": c.evaluations, "enumerated": count}
    return _result(cost, c.memo, list(best_b[:-1]), n, config, stats, method)


def loss_curve(data, model, method, n: Optional[int] = None, d_m: int = 1, M: int = 5):
    """Total loss of every single-changepoint segmentation ``{tau}``, ``d_m <= tau <= n - d_m``.

    ``method`` picks in-sample or cross-fitted costs.  Returns a list of
    ``(tau, total)`` pairs.
    """
    from .detector import build_coster

    n = data.n if n is None else int(n)
    if n != data.n:
        raise InvalidConfigError(f"n={n} does not match the data length {data.n}")
    coster = build_coster(data, model, method, M)
    return [(tau, coster(0, tau) + coster(tau, n)) for tau in range(d_m, n - d_m + 1)]


def select_k_holdout(data, model, method, k_grid, d_m: int = 1, M: int = 5, **kw):
    """Choose the number of changepoints on an odd/even split."""
    from .detector import select_k_holdout as _impl

    return _impl(data, model, method, k_grid, d_m=d_m, M=M, **kw)
