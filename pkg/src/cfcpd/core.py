"""Domain types shared by every module.

Time indices are 1-based and intervals are half-open ``(s, e]``, so the
interval ``(s, e]`` covers the numpy rows ``s, s + 1, ..., e - 1``.  Index
arrays passed between modules are always 0-based row positions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from .exceptions import DataError, InvalidConfigError

REGRESSION = "regression"
MULTIVARIATE = "multivariate"

IN_SAMPLE = "in_sample"
CROSSFIT = "crossfit"
CROSSFIT_RECYCLED = "crossfit_recycled"
COST_MODES = (IN_SAMPLE, CROSSFIT, CROSSFIT_RECYCLED)


def _frozen(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Segmentation:
    """Ordered changepoints ``0 < tau_1 < ... < tau_K < n``."""

    taus: tuple
    n: int

    def __init__(self, taus: Sequence[int], n: int):
        taus = tuple(int(t) for t in taus)
        n = int(n)
        if n < 1:
            raise InvalidConfigError(f"n must be >= 1, got {n}")
        prev = 0
        for t in taus:
            if t <= prev or t >= n:
                raise InvalidConfigError(
                    f"changepoints must be strictly increasing in (0, {n}), got {list(taus)}"
                )
            prev = t
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "n", n)

    def __len__(self):
        return len(self.taus)

    @property
    def boundaries(self) -> tuple:
        return (0,) + self.taus + (self.n,)

    def segments(self) -> list:
        return segments_of(self)

    def labels(self) -> np.ndarray:
        """Segment label (0..K) for every row."""
        out = np.empty(self.n, dtype=int)
        b = self.boundaries
        for k in range(len(b) - 1):
            out[b[k]:b[k + 1]] = k
        return out


def segments_of(seg: Segmentation) -> list:
    """Return the ``K + 1`` half-open intervals ``(s, e]`` of a segmentation."""
    b = seg.boundaries
    return [(b[k], b[k + 1]) for k in range(len(b) - 1)]


@dataclass(frozen=True)
class GroundTruth:
    """Known generating parameters of a simulated dataset.

    ``sigma`` is the covariate covariance matrix (identity when unknown);
    ``noise`` optionally stores the realised noise so responses can be
    regenerated exactly.
    """

    changepoints: Segmentation
    segment_params: tuple
    noise_sd: tuple
    sigma: Optional[np.ndarray] = None
    noise: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        params = tuple(_frozen(np.atleast_1d(f)) for f in self.segment_params)
        if len(params) != len(self.changepoints) + 1:
            raise DataError(
                f"need {len(self.changepoints) + 1} segment parameters, got {len(params)}"
            )
        object.__setattr__(self, "segment_params", params)
        object.__setattr__(self, "noise_sd", tuple(float(s) for s in self.noise_sd))
        if self.sigma is not None:
            object.__setattr__(self, "sigma", _frozen(self.sigma))
        if self.noise is not None:
            object.__setattr__(self, "noise", _frozen(self.noise))

    def param_of_row(self) -> np.ndarray:
        """``(n, p)`` matrix whose row ``i`` is the parameter ``f_i``."""
        labels = self.changepoints.labels()
        return np.vstack(self.segment_params)[labels]

    def covariance(self, p: int) -> np.ndarray:
        return np.eye(p) if self.sigma is None else np.asarray(self.sigma)


@dataclass(frozen=True)
class Dataset:
    """Ordered observations.

    For ``kind == "regression"`` the rows are pairs ``(y_i, x_i)``; for
    ``kind == "multivariate"`` the rows of ``covariates`` are the ``z_i``.
    """

    covariates: np.ndarray
    responses: Optional[np.ndarray] = None
    kind: str = MULTIVARIATE
    truth: Optional[GroundTruth] = None

    def __post_init__(self):
        X = np.asarray(self.covariates, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DataError(f"covariates must be a non-empty 2-d array, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise DataError("covariates contain non-finite values")
        object.__setattr__(self, "covariates", _frozen(X))
        if self.kind == REGRESSION:
            if self.responses is None:
                raise DataError("regression datasets need responses")
            y = np.asarray(self.responses, dtype=float).ravel()
            if y.shape[0] != X.shape[0]:
                raise DataError(f"responses have length {y.shape[0]}, expected {X.shape[0]}")
            if not np.all(np.isfinite(y)):
                raise DataError("responses contain non-finite values")
            object.__setattr__(self, "responses", _frozen(y))
        elif self.kind == MULTIVARIATE:
            if self.responses is not None:
                raise DataError("multivariate datasets carry no responses")
        else:
            raise DataError(f"unknown dataset kind {self.kind!r}")
        if self.truth is not None and self.truth.changepoints.n != X.shape[0]:
            raise DataError("ground truth length does not match the data")

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    @property
    def X(self) -> np.ndarray:
        return self.covariates

    @property
    def y(self) -> Optional[np.ndarray]:
        return self.responses

    def subset(self, rows) -> "Dataset":
        """Dataset restricted to ``rows`` (ground truth is dropped)."""
        rows = np.asarray(rows)
        y = None if self.responses is None else self.responses[rows]
        return Dataset(self.covariates[rows], y, self.kind)


def regression_data(X, y, truth=None) -> Dataset:
    return Dataset(X, y, REGRESSION, truth)


def multivariate_data(Z, truth=None) -> Dataset:
    return Dataset(Z, None, MULTIVARIATE, truth)


@dataclass(frozen=True)
class FoldPlan:
    """Order-preserving partition of the rows into ``M`` folds.

    ``assignment[r]`` is the 1-based fold label of row ``r`` (time index
    ``r + 1``), i.e. ``m(i) = ((i - 1) mod M) + 1``.
    """

    M: int
    n: int

    @property
    def assignment(self) -> np.ndarray:
        return np.arange(self.n) % self.M + 1

    def members(self, m: int) -> np.ndarray:
        """0-based rows of fold ``m`` (1-based label)."""
        return np.arange(m - 1, self.n, self.M)

    def members_in(self, m: int, s: int, e: int) -> np.ndarray:
        """Rows of ``(s, e] ∩ J_m``."""
        first = s + ((m - 1 - s) % self.M)
        return np.arange(first, e, self.M)

    def sizes(self) -> list:
        return [len(range(m - 1, self.n, self.M)) for m in range(1, self.M + 1)]


@dataclass(frozen=True)
class SegmentCost:
    interval: tuple
    value: float
    mode: str
    model_tag: str
    info: Any = None

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise DataError(f"segment cost for {self.interval} is not finite")


@dataclass
class DetectionResult:
    """Outcome of a changepoint search."""

    segmentation: Segmentation
    total_loss: float
    per_segment: list
    method: str = ""
    config: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    @property
    def taus(self) -> list:
        return list(self.segmentation.taus)

    def to_dict(self) -> dict:
        return {
            "taus": self.taus,
            "total_loss": float(self.total_loss),
            "segments": [
                {"s": int(c.interval[0]), "e": int(c.interval[1]), "cost": float(c.value)}
                for c in self.per_segment
            ],
            "method": self.method,
            "config": dict(self.config),
        }
