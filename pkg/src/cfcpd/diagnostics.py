"""Ground-truth diagnostics for squared-loss models on simulated data."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import CROSSFIT, IN_SAMPLE, MULTIVARIATE, REGRESSION
from .exceptions import DataError, InvalidConfigError, UnsupportedModelError
from .lasso import LinearFit
from .models import GaussianMeanModel, LinearModel


def _truth(data_or_truth):
    truth = getattr(data_or_truth, "truth", data_or_truth)
    if truth is None:
        raise DataError("diagnostics need simulated data with embedded ground truth")
    return truth


def _check_model(model):
    if model is not None and not isinstance(model, (LinearModel, GaussianMeanModel)):
        raise UnsupportedModelError(
            f"{type(model).__name__} has no closed-form oracle parameter")


def oracle_param(truth, interval, model=None):
    """Average ``|I|^-1 sum_{i in I} f_i`` of the row parameters over ``(s, e]``.

    Inside a single true segment the stored parameter itself is returned.
    """
    _check_model(model)
    truth = _truth(truth)
    s, e = int(interval[0]), int(interval[1])
    if not 0 <= s < e <= truth.changepoints.n:
        raise InvalidConfigError(f"interval ({s}, {e}] out of range")
    b = truth.changepoints.boundaries
    for k in range(len(b) - 1):
        if b[k] <= s and e <= b[k + 1]:
            return np.array(truth.segment_params[k])
    acc = np.zeros_like(truth.segment_params[0])
    for k in range(len(b) - 1):
        w = min(e, b[k + 1]) - max(s, b[k])
        if w > 0:
            acc = acc + w * truth.segment_params[k]
    return acc / (e - s)


def delta_k(truth, Sigma=None):
    """Change sizes ``||f_k - f_{k+1}||^2_Sigma`` between adjacent true segments."""
    truth = _truth(truth)
    params = truth.segment_params
    p = params[0].shape[0]
    S = truth.covariance(p) if Sigma is None else np.asarray(Sigma, dtype=float)
    if S.shape != (p, p):
        raise DataError(f"Sigma has shape {S.shape}, parameters have length {p}")
    out = []
    for a, b in zip(params[:-1], params[1:]):
        d = a - b
        out.append(float(d @ S @ d))
    return out


@dataclass
class OracleParams:
    f_circ_by_interval: dict = field(default_factory=dict)
    delta: list = field(default_factory=list)


def oracle_params(truth, intervals=()):
    truth = _truth(truth)
    return OracleParams({tuple(iv): oracle_param(truth, iv) for iv in intervals}, delta_k(truth))


def _sigma_for(data, truth):
    return np.eye(data.p) if data.kind == MULTIVARIATE else truth.covariance(data.p)


def _pointwise_oracle_loss(data, truth, rows):
    F = truth.param_of_row()[rows]
    if data.kind == REGRESSION:
        r = data.y[rows] - np.einsum("ij,ij->i", data.X[rows], F)
        return float(r @ r)
    d = data.X[rows] - F
    return float(np.sum(d * d))


def expectation_gap(data, interval):
    """``sum_{i in I} ||f_i - f°_I||^2_Sigma``: the oracle-loss excess of pooling ``I``."""
    truth = _truth(data)
    s, e = int(interval[0]), int(interval[1])
    S = _sigma_for(data, truth)
    D = truth.param_of_row()[s:e] - oracle_param(truth, (s, e))
    return float(np.einsum("ij,jk,ik->", D, S, D))


def xi_of_segment(data, interval, empirical_cost, model=None):
    """Approximation error ``xi_I`` of an empirical segment cost.

    ``(L_I - sum_i l(z_i; f_i)) - sum_i ||f_i - f°_I||^2_Sigma`` with the
    expectation part evaluated in closed form.
    """
    _check_model(model)
    truth = _truth(data)
    s, e = int(interval[0]), int(interval[1])
    L = float(getattr(empirical_cost, "value", empirical_cost))
    return (L - _pointwise_oracle_loss(data, truth, np.arange(s, e))) - expectation_gap(data, (s, e))


@dataclass(frozen=True)
class BiasDecomposition:
    concentration: float
    cross: float
    squared: float
    xi: float

    def residual(self):
        return self.xi - (self.concentration + self.cross + self.squared)


def _coef(fit):
    return np.asarray(fit.coefficients if isinstance(fit, LinearFit) else fit, dtype=float)


def bias_decomposition(data, interval, fit, mode=IN_SAMPLE, folds=None):
    """Split ``xi_I`` of a linear fit into concentration, cross and squared terms.

    In-sample mode takes one fit of ``I``.  Cross-fitted mode takes the list
    of fold fits ``f_{I minus J_m}`` and ``folds``; the cross and squared terms
    are then sums over the folds ``I ∩ J_m``.  The concentration term is
    computed independently from the noise, so ``xi = concentration + cross +
    squared`` is a genuine identity check.
    """
    if data.kind != REGRESSION:
        raise UnsupportedModelError("the bias decomposition is defined for regression data")
    truth = _truth(data)
    s, e = int(interval[0]), int(interval[1])
    rows = np.arange(s, e)
    f0 = oracle_param(truth, (s, e))
    X, y = data.X, data.y
    if mode == IN_SAMPLE:
        parts = [(rows, _coef(fit))]
    elif mode == CROSSFIT:
        if folds is None:
            raise InvalidConfigError("cross-fitted decomposition needs the fold plan")
        fits = list(fit)
        if len(fits) != folds.M:
            raise InvalidConfigError(f"expected {folds.M} fold fits, got {len(fits)}")
        parts = [(folds.members_in(m, s, e), _coef(fits[m - 1])) for m in range(1, folds.M + 1)]
    else:
        raise InvalidConfigError(f"unsupported mode {mode!r}")
    cross = squared = L = 0.0
    for r, f in parts:
        if r.size == 0:
            continue
        u = y[r] - X[r] @ f0
        v = X[r] @ (f - f0)
        cross += -2.0 * float(u @ v)
        squared += float(v @ v)
        res = y[r] - X[r] @ f
        L += float(res @ res)
    u = y[rows] - X[rows] @ f0
    gap = expectation_gap(data, (s, e))
    concentration = float(u @ u) - _pointwise_oracle_loss(data, truth, rows) - gap
    xi = xi_of_segment(data, (s, e), L)
    return BiasDecomposition(concentration, cross, squared, xi)


def crossfit_fits(model, data, interval, folds):
    """Per-fold coefficient vectors ``f_{I minus J_m}`` (zeros for empty folds)."""
    s, e = int(interval[0]), int(interval[1])
    rows = np.arange(s, e)
    out = []
    for m in range(1, folds.M + 1):
        train = rows[(rows % folds.M) != (m - 1)]
        out.append(model.fit(data, train, None))
    return out
