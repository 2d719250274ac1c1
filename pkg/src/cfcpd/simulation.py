"""Simulation designs with embedded ground truth, and the Hausdorff metric."""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from .core import GroundTruth, Segmentation, multivariate_data, regression_data
from .exceptions import InvalidConfigError

SAMPLER = "numpy PCG64 / ziggurat standard_normal"
DGP_NAMES = ("single_cp_linear", "dgp1", "dgp2", "nonparam_mixed", "ridgeless_benign")


def replication_rng(seed, rep=None):
    """Generator for replication ``rep`` of ``seed``; independent across ``rep``."""
    seed = int(seed)
    if seed < 0:
        raise InvalidConfigError("seed must be >= 0")
    ss = np.random.SeedSequence(seed) if rep is None else np.random.SeedSequence(seed, spawn_key=(int(rep),))
    return np.random.Generator(np.random.PCG64(ss))


def _rng(seed, rng):
    return rng if rng is not None else replication_rng(seed)


def toeplitz_cov(p, rho):
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :])


@functools.lru_cache(maxsize=8)
def _sqrt_toeplitz(p, rho):
    w, V = np.linalg.eigh(toeplitz_cov(p, rho))
    R = (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T
    R.setflags(write=False)
    return R


def _scaled_taus(taus, n0, n):
    return [int(round(t * n / n0)) for t in taus]


def _pattern(p, head):
    if p < len(head):
        raise InvalidConfigError(f"p must be >= {len(head)}")
    f = np.zeros(p)
    f[: len(head)] = head
    return f


def _regression(X, params, sds, taus, rng, sigma, meta):
    n = X.shape[0]
    seg = Segmentation(taus, n)
    labels = seg.labels()
    F = np.vstack(params)[labels]
    noise = np.asarray(sds)[labels] * rng.standard_normal(n)
    y = np.einsum("ij,ij->i", X, F) + noise
    truth = GroundTruth(seg, tuple(params), tuple(sds), sigma, noise, dict(meta, sampler=SAMPLER))
    return regression_data(X, y, truth)


def _toeplitz_design(n, p, rng, rho=0.2):
    return rng.standard_normal((n, p)) @ _sqrt_toeplitz(p, rho)


def gen_single_cp_linear(b, seed=0, n=500, p=1000, rng=None):
    """One change at 150 (of 500): ``f_2 = (1 + sqrt(b/5)) f_1`` with ``f_1 = (1,-1,1,-1,1,0,...)``."""
    if not b > 0:
        raise InvalidConfigError("b must be > 0")
    rng = _rng(seed, rng)
    f1 = _pattern(p, [1, -1, 1, -1, 1])
    X = _toeplitz_design(n, p, rng)
    taus = _scaled_taus([150], 500, n)
    return _regression(X, [f1, (1 + np.sqrt(b / 5)) * f1], [1.0, 1.0], taus, rng,
                       toeplitz_cov(p, 0.2), {"dgp": "single_cp_linear", "b": b})


def gen_dgp1(b, seed=0, n=1000, p=1000, rng=None):
    """Three changes; ``f_1 = f_3``, ``f_2 = (1 + sqrt(b/5)) f_1``, ``f_4 = (1 - sqrt(b/5)) f_1``."""
    if not b > 0:
        raise InvalidConfigError("b must be > 0")
    rng = _rng(seed, rng)
    f1 = _pattern(p, [1, -1, 1, -1, 1])
    r = np.sqrt(b / 5)
    X = _toeplitz_design(n, p, rng)
    taus = _scaled_taus([350, 500, 880], 1000, n)
    return _regression(X, [f1, (1 + r) * f1, f1.copy(), (1 - r) * f1], [1.0] * 4, taus, rng,
                       toeplitz_cov(p, 0.2), {"dgp": "dgp1", "b": b})


def dgp2_params(p):
    one = _pattern(p, [1, 1, 1, 1, 1])
    q = _pattern(p, [1, -1.3, 1, -1.3, 1])
    q = q / np.linalg.norm(q)
    return [one, one + q, one.copy(), one - 0.9 * q]


def dgp2_noise_sd(params, Sigma, se):
    """Noise levels making ``||f_k||^2_Sigma + sigma_k^2`` equal across segments, ``min sigma_k = se``."""
    norms = np.array([f @ Sigma @ f for f in params])
    var = norms.max() + se ** 2 - norms
    if np.any(var <= 0):
        raise InvalidConfigError("non-positive noise variance")
    return np.sqrt(var)


def gen_dgp2(se, seed=0, n=1000, p=1000, rng=None):
    """Three changes with segment noise levels keeping ``Var(y)`` constant."""
    if not se > 0:
        raise InvalidConfigError("se must be > 0")
    rng = _rng(seed, rng)
    params = dgp2_params(p)
    Sigma = toeplitz_cov(p, 0.2)
    sds = dgp2_noise_sd(params, Sigma, se)
    X = _toeplitz_design(n, p, rng)
    taus = _scaled_taus([350, 500, 880], 1000, n)
    return _regression(X, params, list(sds), taus, rng, Sigma, {"dgp": "dgp2", "se": se})


def gen_nonparam(b, seed=0, n=1000, p=20, rng=None):
    """Correlated block, standard, mean-shifted block, standard; changes at 350, 500, 880."""
    if not 0 < b < 1:
        raise InvalidConfigError("b must lie in (0, 1)")
    if p < 5:
        raise InvalidConfigError("p must be >= 5")
    rng = _rng(seed, rng)
    taus = _scaled_taus([350, 500, 880], 1000, n)
    seg = Segmentation(taus, n)
    bounds = seg.boundaries
    Z = rng.standard_normal((n, p))
    s, e = bounds[0], bounds[1]
    Z[s:e] = Z[s:e] @ _sqrt_toeplitz(p, float(b))
    shift = _pattern(p, [b] * 5)
    Z[bounds[2]:bounds[3]] += shift
    zero = np.zeros(p)
    truth = GroundTruth(seg, (zero, zero.copy(), shift, zero.copy()), (1.0,) * 4, None, None,
                        {"dgp": "nonparam_mixed", "b": b, "sampler": SAMPLER,
                         "segment_covariance": ["toeplitz", "identity", "identity", "identity"]})
    return multivariate_data(Z, truth)


def benign_spectrum(p, n_spikes=5):
    """A few separated large eigenvalues followed by a slowly decaying flat-ish tail."""
    if p <= n_spikes:
        raise InvalidConfigError(f"p must exceed {n_spikes}")
    head = 1.0 + 0.1 * np.arange(n_spikes - 1, -1, -1)
    tail = 0.1 * np.arange(1, p - n_spikes + 1) ** -0.05
    return np.concatenate([head, tail])


def gen_ridgeless_benign(seed=0, n=500, p=1000, rng=None):
    """One change at 150 (of 500) with a benign diagonal covariance.

    The top eigenvectors are the first coordinate axes, so
    ``f_1 = sum_{j<=5} e_j / sqrt(5)`` and ``f_2 = sum_{j<=5} (-1)^j e_j / sqrt(5)``.
    """
    rng = _rng(seed, rng)
    lam = benign_spectrum(p)
    sign = np.array([(-1.0) ** j for j in range(1, 6)])
    f1 = _pattern(p, np.ones(5) / np.sqrt(5))
    f2 = _pattern(p, sign / np.sqrt(5))
    X = rng.standard_normal((n, p)) * np.sqrt(lam)
    taus = _scaled_taus([150], 500, n)
    return _regression(X, [f1, f2], [1.0, 1.0], taus, rng, np.diag(lam),
                       {"dgp": "ridgeless_benign"})


@dataclass(frozen=True)
class DgpSpec:
    name: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.name not in DGP_NAMES:
            raise InvalidConfigError(f"unknown dgp {self.name!r}; choose from {DGP_NAMES}")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidConfigError("seed must be a 64-bit unsigned integer")


_GENERATORS = {
    "single_cp_linear": (gen_single_cp_linear, "b", 5.0),
    "dgp1": (gen_dgp1, "b", 1.0),
    "dgp2": (gen_dgp2, "se", 0.5),
    "nonparam_mixed": (gen_nonparam, "b", 0.7),
    "ridgeless_benign": (gen_ridgeless_benign, None, None),
}


def generate(spec: DgpSpec, rep=None):
    """Dataset for ``spec``; replication ``rep`` draws from its own substream."""
    fn, key, default = _GENERATORS[spec.name]
    kw = {k: v for k, v in spec.params.items() if k in ("n", "p") and v is not None}
    kw = {k: int(v) for k, v in kw.items()}
    rng = replication_rng(spec.seed, rep)
    if key is None:
        return fn(rng=rng, **kw)
    val = spec.params.get(key)
    return fn(default if val is None else float(val), rng=rng, **kw)


def _directed(a, b, n):
    if len(a) == 0:
        return 0
    if len(b) == 0:
        return n
    A = np.asarray(a)[:, None]
    B = np.asarray(b)[None, :]
    return int(np.max(np.min(np.abs(A - B), axis=1)))


def hausdorff(true_taus, est_taus, n):
    """``(distance, (d_est_to_true, d_true_to_est))``.

    ``d_est_to_true`` is the largest distance from an estimate to its nearest
    true changepoint, ``d_true_to_est`` the converse.  An empty set against a
    nonempty one gives distance ``n``; two empty sets give 0.
    """
    t = [int(v) for v in true_taus]
    e = [int(v) for v in est_taus]
    for v in t + e:
        if not 0 < v < n:
            raise InvalidConfigError(f"changepoint {v} outside (0, {n})")
    if not t and not e:
        return 0, (0, 0)
    d1, d2 = _directed(e, t, n), _directed(t, e, n)
    return max(d1, d2), (d1, d2)
