"""Segment-level linear fits: lasso, lambda grids, cross-validated lambda,
ridgeless (minimum-norm) least squares and least squares on selected columns.

The lasso objective is ``||y - X f||^2 + lam * sqrt(m) * ||f||_1`` where ``m``
is the number of rows; there is no ``1 / (2m)`` normalisation.  All solvers
work on the Gram form ``(G, c) = (X'X, X'y)`` so that sub-sample fits can be
assembled from Gram blocks without touching the raw rows again.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .exceptions import InvalidConfigError, NumericError, SegmentInfeasibleError

TOL_COORD = 1e-7
MAX_SWEEPS = 1000
TOL_KKT = 1e-5
RCOND = 1e-10
DEFAULT_GRID_SIZE = 50
DEFAULT_GRID_RATIO = 1e-3


@dataclass(frozen=True)
class LinearFit:
    coefficients: np.ndarray
    lam: float
    objective: float

    @property
    def active_set(self) -> np.ndarray:
        return np.flatnonzero(self.coefficients)


@dataclass(frozen=True)
class LambdaGrid:
    """Strictly decreasing regularisation values.

    A single entry ``0`` is the degenerate grid returned when ``X'y == 0``.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size == 0:
            raise InvalidConfigError("lambda grid is empty")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise InvalidConfigError("lambda grid values must be finite and >= 0")
        if np.any(v[:-1] == 0):
            raise InvalidConfigError("0 is only allowed as the last grid value")
        if np.any(np.diff(v) >= 0):
            raise InvalidConfigError("lambda grid must be strictly decreasing")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def __iter__(self):
        return iter(self.values)


# ---------------------------------------------------------------- numba core


@njit(cache=True)
def _soft(x, t):
    if x > t:
        return x - t
    if x < -t:
        return x + t
    return 0.0


@njit(cache=True)
def _cd_sweep(G, c, pen, f, q, active_only):
    # one cyclic pass; q holds G @ f and is updated in place
    p = c.shape[0]
    max_delta = 0.0
    for j in range(p):
        if active_only and f[j] == 0.0:
            continue
        gjj = G[j, j]
        old = f[j]
        if gjj <= 0.0:
            new = 0.0
        else:
            rho = c[j] - q[j] + gjj * old
            new = _soft(rho, 0.5 * pen) / gjj
        d = new - old
        if d != 0.0:
            # G is symmetric; the row is contiguous
            Gj = G[j]
            for k in range(p):
                q[k] += Gj[k] * d
            f[j] = new
            ad = abs(d)
            if ad > max_delta:
                max_delta = ad
    return max_delta


@njit(cache=True)
def _cd_solve(G, c, pen, f, q, tol, max_sweeps):
    """Coordinate descent with active-set inner loops; returns sweep count."""
    sweeps = 0
    while sweeps < max_sweeps:
        delta = _cd_sweep(G, c, pen, f, q, False)
        sweeps += 1
        if delta < tol:
            break
        while sweeps < max_sweeps:
            delta = _cd_sweep(G, c, pen, f, q, True)
            sweeps += 1
            if delta < tol:
                break
    return sweeps


@njit(cache=True)
def _cd_path(G, c, pens, f0, tol, max_sweeps):
    p = c.shape[0]
    L = pens.shape[0]
    out = np.zeros((L, p))
    f = f0.copy()
    q = G @ f
    for i in range(L):
        _cd_solve(G, c, pens[i], f, q, tol, max_sweeps)
        out[i] = f
    return out


@njit(cache=True)
def _cd_trace(G, c, yy, pen, f, tol, max_sweeps):
    # full-sweep-only variant that records the objective after every sweep
    q = G @ f
    objs = np.empty(max_sweeps + 1)
    objs[0] = yy - 2.0 * (c @ f) + f @ q + pen * np.abs(f).sum()
    k = 0
    while k < max_sweeps:
        delta = _cd_sweep(G, c, pen, f, q, False)
        k += 1
        objs[k] = yy - 2.0 * (c @ f) + f @ q + pen * np.abs(f).sum()
        if delta < tol:
            break
    return objs[: k + 1]


# ---------------------------------------------------------------- helpers


def _check_xy(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] < 1:
        raise InvalidConfigError(f"incompatible shapes X{X.shape}, y{y.shape}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NumericError("non-finite values in lasso input")
    return X, y


def gram(X, y):
    """Return ``(X'X, X'y, y'y)``."""
    return X.T @ X, X.T @ y, float(y @ y)


def penalized_objective(X, y, f, lam):
    r = y - X @ f
    return float(r @ r + lam * np.sqrt(X.shape[0]) * np.abs(f).sum())


def lambda_max_from(c, m):
    return 2.0 * float(np.max(np.abs(c))) / np.sqrt(m) if c.size else 0.0


def lasso_path_gram(G, c, m, lams, warm_start=None, tol=TOL_COORD, max_sweeps=MAX_SWEEPS):
    """Warm-started lasso solutions for each value in ``lams`` (in given order).

    ``m`` is the row count behind the Gram matrix; it sets the
    ``lam * sqrt(m)`` penalty scale.
    """
    lams = np.asarray(lams, dtype=float)
    f0 = np.zeros(c.shape[0]) if warm_start is None else np.array(warm_start, dtype=float)
    out = _cd_path(np.ascontiguousarray(G), np.ascontiguousarray(c),
                   lams * np.sqrt(m), f0, tol, max_sweeps)
    # lam * sqrt(m) / 2 need not round back to ||c||_inf exactly at lambda_max
    out[lams >= lambda_max_from(np.asarray(c), m)] = 0.0
    return out


def lasso_objective_trace(X, y, lam, warm_start=None, tol=TOL_COORD, max_sweeps=MAX_SWEEPS):
    """Penalised objective after each full coordinate sweep (for monitoring)."""
    X, y = _check_xy(X, y)
    G, c, yy = gram(X, y)
    f = np.zeros(X.shape[1]) if warm_start is None else np.array(warm_start, dtype=float)
    return _cd_trace(G, c, yy, lam * np.sqrt(X.shape[0]), f, tol, max_sweeps)


# ---------------------------------------------------------------- public API


def lasso_fit(X, y, lam, warm_start=None, standardize=False,
              tol=TOL_COORD, max_sweeps=MAX_SWEEPS) -> LinearFit:
    """Minimise ``||y - X f||^2 + lam * sqrt(m) * ||f||_1`` by coordinate descent.

    Parameters
    ----------
    X : ndarray of shape (m, p)
    y : ndarray of shape (m,)
    lam : float
        Non-negative regulariser.
    warm_start : ndarray of shape (p,), optional
        Initial coefficients.
    standardize : bool, default=False
        Rescale columns to unit root-mean-square before fitting and map the
        coefficients back afterwards.
    """
    X, y = _check_xy(X, y)
    if not np.isfinite(lam) or lam < 0:
        raise InvalidConfigError(f"lambda must be finite and >= 0, got {lam}")
    m = X.shape[0]
    scale = np.ones(X.shape[1])
    Xw = X
    if standardize:
        scale = np.sqrt((X ** 2).mean(axis=0))
        scale[scale == 0] = 1.0
        Xw = X / scale
    G, c, _ = gram(Xw, y)
    f0 = None if warm_start is None else np.asarray(warm_start, dtype=float) * scale
    f = lasso_path_gram(G, c, m, [lam], f0, tol, max_sweeps)[0] / scale
    # objective is reported in the (possibly rescaled) coordinates that were solved
    return LinearFit(f, float(lam), penalized_objective(Xw, y, f * scale, lam))


def lambda_grid(X, y, G=DEFAULT_GRID_SIZE, ratio=DEFAULT_GRID_RATIO) -> LambdaGrid:
    """Log-spaced grid from ``lambda_max = 2 ||X'y||_inf / sqrt(m)`` down to
    ``ratio * lambda_max``."""
    X, y = _check_xy(X, y)
    return grid_from_gram(X.T @ y, X.shape[0], G, ratio)


def grid_from_gram(c, m, G=DEFAULT_GRID_SIZE, ratio=DEFAULT_GRID_RATIO) -> LambdaGrid:
    if G < 2 or not 0 < ratio < 1:
        raise InvalidConfigError(f"need G >= 2 and 0 < ratio < 1, got G={G}, ratio={ratio}")
    lmax = lambda_max_from(np.asarray(c), m)
    if lmax == 0:
        return LambdaGrid(np.array([0.0]))
    return LambdaGrid(lmax * np.logspace(0.0, np.log10(ratio), int(G)))


def order_preserving_folds(m, B):
    """Fold label ``0..B-1`` for positions ``0..m-1`` (position mod B)."""
    return np.arange(m) % B


def cv_losses_gram(X, y, grid, B, fold_labels=None, G=None, c=None):
    """Per-lambda B-fold validation loss; folds are order-preserving by position."""
    m = X.shape[0]
    if B < 2:
        raise InvalidConfigError(f"need at least 2 CV folds, got {B}")
    labels = order_preserving_folds(m, B) if fold_labels is None else np.asarray(fold_labels)
    if G is None:
        G, c, _ = gram(X, y)
    parts = []
    for b in range(B):
        val = labels == b
        Xv, yv = X[val], y[val]
        parts.append((Xv.T @ Xv, Xv.T @ yv, Xv, yv))
    return cv_losses_parts(G, c, m, grid, parts)


def cv_losses_parts(G, c, m, grid, parts):
    """Validation losses given the full Gram ``(G, c)`` of ``m`` rows and, per
    fold, ``(G_v, c_v, X_v, y_v)`` of its validation rows."""
    lams = np.asarray(grid.values if isinstance(grid, LambdaGrid) else grid, dtype=float)
    losses = np.zeros(lams.size)
    for b, (Gv, cv, Xv, yv) in enumerate(parts):
        mv = Xv.shape[0]
        if m - mv < 2:
            raise InvalidConfigError(f"CV fold {b} leaves {m - mv} training rows (< 2)")
        if mv == 0:
            continue
        coefs = lasso_path_gram(G - Gv, c - cv, m - mv, lams)
        resid = yv[:, None] - Xv @ coefs.T
        losses += np.einsum("ij,ij->j", resid, resid)
    return losses


def argmin_larger_lambda(lams, losses):
    """Index of the minimal loss; ties go to the larger lambda."""
    lams = np.asarray(lams)
    losses = np.asarray(losses)
    best = losses.min()
    ties = np.flatnonzero(losses == best)
    return int(ties[np.argmax(lams[ties])])


def cv_lambda(X, y, B=5, grid=None, fold_labels=None):
    """Select lambda by B-fold cross-validation.

    Returns ``(lambda_cv, losses)`` with ``losses`` aligned to ``grid.values``.
    """
    X, y = _check_xy(X, y)
    if grid is None:
        grid = lambda_grid(X, y)
    losses = cv_losses_gram(X, y, grid, B, fold_labels)
    lams = grid.values if isinstance(grid, LambdaGrid) else np.asarray(grid, dtype=float)
    return float(lams[argmin_larger_lambda(lams, losses)]), losses


def ridgeless_fit(X, y, rcond=RCOND) -> LinearFit:
    """Minimum-norm least squares ``X^+ y`` via SVD with a relative cutoff."""
    X, y = _check_xy(X, y)
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    keep = s > rcond * (s[0] if s.size else 0.0)
    f = Vt[keep].T @ ((U[:, keep].T @ y) / s[keep])
    r = y - X @ f
    return LinearFit(f, 0.0, float(r @ r))


def ls_on_selected(X, y, selected) -> LinearFit:
    """Ordinary least squares on the columns in ``selected``; zero elsewhere."""
    X, y = _check_xy(X, y)
    sel = np.unique(np.asarray(selected, dtype=int))
    f = np.zeros(X.shape[1])
    if sel.size:
        if sel.size > X.shape[0]:
            raise SegmentInfeasibleError(f"{sel.size} selected columns exceed {X.shape[0]} rows")
        Xs = X[:, sel]
        s = np.linalg.svd(Xs, compute_uv=False)
        if s[-1] <= RCOND * s[0] * max(Xs.shape):
            raise SegmentInfeasibleError("selected design is rank deficient")
        f[sel] = np.linalg.lstsq(Xs, y, rcond=None)[0]
    r = y - X @ f
    return LinearFit(f, 0.0, float(r @ r))


def screen_top(X, y, d):
    """Indices of the ``d`` columns with the largest ``|x_j' y|`` (stable order)."""
    score = np.abs(X.T @ y)
    d = int(min(max(d, 0), X.shape[1]))
    return np.sort(np.argsort(-score, kind="stable")[:d])


def kkt_residuals(X, y, f, lam):
    """Return ``(inactive_excess, active_gap)`` of the lasso optimality conditions.

    ``inactive_excess`` is ``max(|2 x_j' r| - lam sqrt(m))`` over zero
    coordinates (<= 0 when satisfied) and ``active_gap`` is
    ``max |2 x_j' r - sign(f_j) lam sqrt(m)|`` over non-zero coordinates.
    """
    m = X.shape[0]
    g = 2.0 * X.T @ (y - X @ f)
    pen = lam * np.sqrt(m)
    zero = f == 0
    inactive = float(np.max(np.abs(g[zero]) - pen)) if zero.any() else -np.inf
    active = float(np.max(np.abs(g[~zero] - np.sign(f[~zero]) * pen))) if (~zero).any() else 0.0
    return inactive, active
