"""Score-function models and samplers.

A model is represented by its dimension and score function
``s(x) = grad_x log p(x)``, which is all the Stein statistics need; the
normalizer of ``p`` is never touched.  Where available, the unnormalized
log-density is kept alongside so that scores can be cross-checked by finite
differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import logsumexp

from .exceptions import ConfigError, InvalidModelError, SampleSizeError

__all__ = [
    "ScoredModel",
    "RbmParams",
    "GmmParams",
    "Sample",
    "gaussian_score",
    "gmm_score",
    "rbm_score",
    "gaussian_model",
    "gmm_model",
    "rbm_model",
    "sample_rbm_gibbs",
    "sample_standard",
    "fit_gmm_em",
    "model_from_config",
    "LAPLACE_MATCHED_SCALE",
]

# Scale making a product-Laplace match the unit-variance Gaussian per coordinate.
LAPLACE_MATCHED_SCALE = 1.0 / np.sqrt(2.0)


def _as_2d(x, dim):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return x.reshape(1, dim), True
    if x.ndim == 2 and x.shape[1] == dim:
        return x, False
    raise InvalidModelError(f"expected points of dimension {dim}, got shape {x.shape}")


@dataclass(frozen=True)
class ScoredModel:
    """A density known up to normalization.

    ``score`` maps an (n, d) array of points to an (n, d) array of score
    vectors; a single d-vector is also accepted and returned as a d-vector.
    """

    dim: int
    score: Callable[[np.ndarray], np.ndarray]
    log_density_unnorm: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidModelError("model dimension must be >= 1")

    def score_at(self, x):
        """Score evaluated at points ``x``, preserving the input's rank."""
        pts, squeeze = _as_2d(x, self.dim)
        out = self.score(pts)
        return out[0] if squeeze else out


@dataclass(frozen=True)
class RbmParams:
    """Gaussian-Bernoulli RBM parameters: visible-hidden weights B (d x d_h),
    visible offset b (d) and hidden offset c (d_h).  Hidden units take values
    in {-1, +1}."""

    B: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        b = np.asarray(self.b, dtype=float).ravel()
        c = np.asarray(self.c, dtype=float).ravel()
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        if B.shape != (b.size, c.size):
            raise InvalidModelError(
                f"B has shape {B.shape}, expected ({b.size}, {c.size})"
            )
        if b.size < 1 or c.size < 1:
            raise InvalidModelError("RBM needs d >= 1 and d_h >= 1")
        if not (np.isfinite(B).all() and np.isfinite(b).all() and np.isfinite(c).all()):
            raise InvalidModelError("RBM parameters must be finite")

    @property
    def dim(self):
        return self.b.size

    @property
    def dim_hidden(self):
        return self.c.size


@dataclass(frozen=True)
class GmmParams:
    """Gaussian mixture parameters: component weights on the simplex, means
    (K x d) and SPD covariances (K x d x d)."""

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        mu = np.atleast_2d(np.asarray(self.means, dtype=float))
        cov = np.asarray(self.covariances, dtype=float)
        if cov.ndim == 2:
            cov = cov[None, :, :]
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "covariances", cov)
        K, d = mu.shape
        if w.size != K or cov.shape != (K, d, d):
            raise InvalidModelError("inconsistent GMM component shapes")
        if abs(w.sum() - 1.0) > 1e-12 or (w < 0).any():
            raise InvalidModelError("mixture weights must lie on the simplex")
        for S in cov:
            if not np.allclose(S, S.T):
                raise InvalidModelError("covariance must be symmetric")
            if np.linalg.eigvalsh(S).min() <= 0:
                raise InvalidModelError("covariance must be positive definite")

    @property
    def n_components(self):
        return self.weights.size

    @property
    def dim(self):
        return self.means.shape[1]


@dataclass(frozen=True)
class Sample:
    """An observed sample: (n, d) data matrix plus optional seed provenance."""

    data: np.ndarray
    seed: Optional[int] = None

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.data, dtype=float))
        object.__setattr__(self, "data", X)
        if not np.isfinite(X).all():
            raise InvalidModelError("sample contains non-finite entries")
        if X.shape[0] < 2:
            raise SampleSizeError("a sample needs at least 2 observations")

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def dim(self):
        return self.data.shape[1]


def as_data(sample):
    """Accept either a Sample or a raw (n, d) array."""
    if isinstance(sample, Sample):
        return sample.data
    return np.atleast_2d(np.asarray(sample, dtype=float))


# ---------------------------------------------------------------------------
# scores


def gaussian_score(x, mean, variance):
    """Score of N(mean, variance): -Sigma^{-1}(x - mean).

    ``variance`` may be a positive scalar, a vector of per-coordinate
    variances, or an SPD matrix.
    """
    mean = np.asarray(mean, dtype=float).ravel()
    d = mean.size
    pts, squeeze = _as_2d(x, d)
    diff = pts - mean
    variance = np.asarray(variance, dtype=float)
    if variance.ndim == 0:
        if variance <= 0:
            raise InvalidModelError("variance must be positive")
        out = -diff / float(variance)
    elif variance.ndim == 1:
        if (variance <= 0).any():
            raise InvalidModelError("variances must be positive")
        out = -diff / variance
    else:
        if not np.allclose(variance, variance.T):
            raise InvalidModelError("covariance must be symmetric")
        try:
            L = np.linalg.cholesky(variance)
        except np.linalg.LinAlgError as exc:
            raise InvalidModelError("covariance is not SPD") from exc
        out = -np.linalg.solve(L.T, np.linalg.solve(L, diff.T)).T
    return out[0] if squeeze else out


def _gmm_log_resp(pts, params: GmmParams):
    """Log joint weights log(w_k N(x; mu_k, S_k)) per point, (n, K)."""
    n = pts.shape[0]
    K = params.n_components
    log_parts = np.empty((n, K))
    for k in range(K):
        S = params.covariances[k]
        L = np.linalg.cholesky(S)
        diff = pts - params.means[k]
        sol = np.linalg.solve(L, diff.T)
        maha = (sol**2).sum(axis=0)
        logdet = 2.0 * np.log(np.diag(L)).sum()
        log_parts[:, k] = (
            np.log(params.weights[k] + 1e-300)
            - 0.5 * maha
            - 0.5 * logdet
            - 0.5 * params.dim * np.log(2 * np.pi)
        )
    return log_parts


def gmm_score(x, params: GmmParams):
    """Score of a Gaussian mixture, log-sum-exp stabilized.

    Returns sum_k r_k(x) Sigma_k^{-1} (mu_k - x) with posterior
    responsibilities r_k(x).
    """
    pts, squeeze = _as_2d(x, params.dim)
    log_parts = _gmm_log_resp(pts, params)
    log_norm = logsumexp(log_parts, axis=1, keepdims=True)
    resp = np.exp(log_parts - log_norm)  # (n, K)
    out = np.zeros_like(pts)
    for k in range(params.n_components):
        diff = params.means[k] - pts
        out += resp[:, k:k + 1] * np.linalg.solve(params.covariances[k], diff.T).T
    return out[0] if squeeze else out


def gmm_log_density(x, params: GmmParams):
    pts, squeeze = _as_2d(x, params.dim)
    out = logsumexp(_gmm_log_resp(pts, params), axis=1)
    return out[0] if squeeze else out


def rbm_score(x, params: RbmParams):
    """Score of the Gaussian-Bernoulli RBM marginal: b - x + B tanh(B^T x + c)."""
    pts, squeeze = _as_2d(x, params.dim)
    act = pts @ params.B + params.c  # (n, d_h)
    out = params.b - pts + np.tanh(act) @ params.B.T
    return out[0] if squeeze else out


def rbm_log_density_unnorm(x, params: RbmParams):
    """log p(x) + const after marginalizing h in {-1, +1}^{d_h}."""
    pts, squeeze = _as_2d(x, params.dim)
    act = pts @ params.B + params.c
    # log 2 cosh(a) = |a| + log(1 + exp(-2|a|))
    log2cosh = np.abs(act) + np.log1p(np.exp(-2.0 * np.abs(act)))
    out = pts @ params.b - 0.5 * (pts**2).sum(axis=1) + log2cosh.sum(axis=1)
    return out[0] if squeeze else out


# ---------------------------------------------------------------------------
# model constructors


def gaussian_model(mean, variance):
    mean = np.asarray(mean, dtype=float).ravel()
    d = mean.size
    gaussian_score(np.zeros(d), mean, variance)  # validate eagerly
    variance_arr = np.asarray(variance, dtype=float)

    def logp(X):
        diff = np.atleast_2d(X) - mean
        if variance_arr.ndim == 0:
            return -0.5 * (diff**2).sum(axis=1) / float(variance_arr)
        if variance_arr.ndim == 1:
            return -0.5 * (diff**2 / variance_arr).sum(axis=1)
        sol = np.linalg.solve(variance_arr, diff.T)
        return -0.5 * (diff.T * sol).sum(axis=0)

    return ScoredModel(
        dim=d,
        score=lambda X: gaussian_score(X, mean, variance),
        log_density_unnorm=logp,
    )


def gmm_model(params: GmmParams):
    return ScoredModel(
        dim=params.dim,
        score=lambda X: gmm_score(X, params),
        log_density_unnorm=lambda X: gmm_log_density(X, params),
    )


def rbm_model(params: RbmParams):
    return ScoredModel(
        dim=params.dim,
        score=lambda X: rbm_score(X, params),
        log_density_unnorm=lambda X: rbm_log_density_unnorm(X, params),
    )


# ---------------------------------------------------------------------------
# samplers


def sample_rbm_gibbs(params: RbmParams, n, burn_in, seed):
    """Blocked Gibbs draws from the RBM marginal, one independent chain per row.

    Each chain starts at x0 ~ N(0, I) and alternates
    h_j | x  with P(h_j = +1) = sigmoid(2 (B^T x + c)_j)  and
    x | h ~ N(B h + b, I) for ``burn_in`` sweeps.
    """
    if n < 1:
        raise SampleSizeError("need n >= 1 chains")
    if burn_in < 0:
        raise ConfigError("burn_in must be >= 0")
    rng = np.random.default_rng(seed)
    d = params.dim
    X = rng.standard_normal((n, d))
    for _ in range(burn_in):
        act = 2.0 * (X @ params.B + params.c)
        p_plus = 1.0 / (1.0 + np.exp(-act))
        H = np.where(rng.random(p_plus.shape) < p_plus, 1.0, -1.0)
        X = H @ params.B.T + params.b + rng.standard_normal((n, d))
    return Sample(data=X, seed=seed)


def sample_standard(kind, params, n, seed):
    """I.i.d. draws from one of the stock data distributions.

    kind "gauss":          params {"mean": vector, "cov": scalar|vector|matrix}
    kind "laplace_product": params {"d": int, "scale": float (default 1/sqrt(2))}
    kind "gmm":            params GmmParams (or {"gmm": GmmParams})
    """
    rng = np.random.default_rng(seed)
    if kind == "gauss":
        mean = np.asarray(params["mean"], dtype=float).ravel()
        cov = np.asarray(params.get("cov", 1.0), dtype=float)
        d = mean.size
        Z = rng.standard_normal((n, d))
        if cov.ndim == 0:
            X = mean + np.sqrt(float(cov)) * Z
        elif cov.ndim == 1:
            X = mean + np.sqrt(cov) * Z
        else:
            L = np.linalg.cholesky(cov)
            X = mean + Z @ L.T
        return Sample(data=X, seed=seed)
    if kind == "laplace_product":
        d = int(params["d"])
        scale = float(params.get("scale", LAPLACE_MATCHED_SCALE))
        X = rng.laplace(loc=0.0, scale=scale, size=(n, d))
        return Sample(data=X, seed=seed)
    if kind == "gmm":
        gp = params["gmm"] if isinstance(params, dict) else params
        if not isinstance(gp, GmmParams):
            raise ConfigError("gmm sampling needs GmmParams")
        counts = rng.multinomial(n, gp.weights)
        chunks = []
        for k, m in enumerate(counts):
            if m == 0:
                continue
            L = np.linalg.cholesky(gp.covariances[k])
            chunks.append(gp.means[k] + rng.standard_normal((m, gp.dim)) @ L.T)
        X = np.concatenate(chunks, axis=0)
        rng.shuffle(X, axis=0)
        return Sample(data=X, seed=seed)
    raise ConfigError(f"unknown sampler kind: {kind!r}")


# ---------------------------------------------------------------------------
# EM fitting


def _kmeans_pp_init(X, K, rng):
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    for _ in range(1, K):
        d2 = np.min(
            ((X[:, None, :] - np.asarray(centers)[None, :, :]) ** 2).sum(axis=2),
            axis=1,
        )
        total = d2.sum()
        if total <= 0:
            centers.append(X[rng.integers(n)])
        else:
            centers.append(X[rng.choice(n, p=d2 / total)])
    return np.asarray(centers)


def fit_gmm_em(sample, K, iters, seed, cov_floor=1e-6):
    """Fit a K-component GMM by EM with k-means++ style initialization.

    Covariances are floored at ``cov_floor * I``; an emptied component is
    re-seeded from a random data point.
    """
    X = as_data(sample)
    n, d = X.shape
    if n < K:
        raise SampleSizeError(f"need n >= K, got n={n}, K={K}")
    rng = np.random.default_rng(seed)
    means = _kmeans_pp_init(X, K, rng)
    covs = np.tile(np.cov(X.T).reshape(d, d) + cov_floor * np.eye(d), (K, 1, 1))
    weights = np.full(K, 1.0 / K)
    for _ in range(iters):
        params = GmmParams(weights=weights, means=means, covariances=covs)
        log_parts = _gmm_log_resp(X, params)
        log_norm = logsumexp(log_parts, axis=1, keepdims=True)
        resp = np.exp(log_parts - log_norm)
        nk = resp.sum(axis=0)
        for k in range(K):
            if nk[k] < 1e-10:
                # re-seed this component from a random data point
                means[k] = X[rng.integers(n)]
                covs[k] = np.cov(X.T).reshape(d, d) + cov_floor * np.eye(d)
                nk[k] = 1.0
                resp[:, k] = 1.0 / n
                continue
            means[k] = resp[:, k] @ X / nk[k]
            diff = X - means[k]
            covs[k] = (resp[:, k] * diff.T) @ diff / nk[k] + cov_floor * np.eye(d)
        weights = nk / nk.sum()
    return GmmParams(weights=weights, means=means, covariances=covs)


def gmm_log_likelihood(sample, params: GmmParams):
    """Mean log-likelihood of the sample (normalized density)."""
    X = as_data(sample)
    return float(logsumexp(_gmm_log_resp(X, params), axis=1).mean())


# ---------------------------------------------------------------------------
# JSON model configs


def model_from_config(config):
    """Build a ScoredModel from a JSON-style config dict.

    Layout: {"type": "gauss"|"gmm"|"rbm", "params": {...}} with matrices as
    nested (row-major) lists.
    """
    if isinstance(config, str):
        with open(config) as fh:
            config = json.load(fh)
    try:
        kind = config["type"]
        params = config["params"]
    except (KeyError, TypeError) as exc:
        raise ConfigError("model config needs 'type' and 'params'") from exc
    if kind == "gauss":
        return gaussian_model(params["mean"], params.get("cov", 1.0))
    if kind == "gmm":
        gp = GmmParams(
            weights=params["weights"],
            means=params["means"],
            covariances=params["covariances"],
        )
        return gmm_model(gp)
    if kind == "rbm":
        rp = RbmParams(B=params["B"], b=params["b"], c=params["c"])
        return rbm_model(rp)
    raise ConfigError(f"unknown model type: {kind!r}")
