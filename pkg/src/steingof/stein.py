"""Stein feature map, the FSSD statistic, and the KSD/LKS U-statistic kernel.

The FSSD estimator is computed through the O(n) identity
``sum_{i != j} tau_i . tau_j = ||sum_i tau_i||^2 - sum_i ||tau_i||^2``;
linear runtime is part of the contract, not an optimization.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import InvalidModelError, SampleSizeError
from .kernel import GaussKernel
from .models import ScoredModel, as_data

__all__ = [
    "TestLocations",
    "SteinFeatures",
    "LksStat",
    "xi",
    "tau",
    "feature_matrix",
    "fssd2_ustat",
    "moments",
    "sigma_h1_hat",
    "hp",
    "hp_gram",
    "ksd2_ustat",
    "lks2_stat",
]


@dataclass(frozen=True)
class TestLocations:
    """The J feature points (J, d) together with the kernel bandwidth."""

    V: np.ndarray
    kernel: GaussKernel

    def __post_init__(self):
        V = np.atleast_2d(np.asarray(self.V, dtype=float))
        object.__setattr__(self, "V", V)
        if V.shape[0] < 1:
            raise InvalidModelError("need at least one test location")
        if not np.isfinite(V).all():
            raise InvalidModelError("test locations must be finite")
        if V.shape[0] > 1:
            diffs = V[:, None, :] - V[None, :, :]
            sq = (diffs**2).sum(axis=2)
            sq[np.diag_indices_from(sq)] = np.inf
            if sq.min() == 0.0:
                raise InvalidModelError("test locations must be pairwise distinct")

    @property
    def n_locations(self):
        return self.V.shape[0]

    @property
    def dim(self):
        return self.V.shape[1]

    def to_json(self):
        return json.dumps(
            {"V": self.V.tolist(), "bandwidth_sq": self.kernel.bandwidth_sq}
        )

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        return cls(V=np.asarray(doc["V"]), kernel=GaussKernel(doc["bandwidth_sq"]))


@dataclass(frozen=True)
class SteinFeatures:
    """Row-stacked feature vectors tau(x_i) with their sample moments.

    ``sigma_q_hat`` uses the 1/n normalization of the plug-in covariance."""

    tau_rows: np.ndarray
    mu_hat: np.ndarray
    sigma_q_hat: np.ndarray


class LksStat(NamedTuple):
    """Mean of h_p over disjoint sample pairs plus its spread."""

    value: float
    pair_std: float
    n_pairs: int


def xi(model: ScoredModel, x, v, kernel: GaussKernel):
    """The Stein-transformed feature xi_p(x, v) = s_p(x) k(x, v) + d k(x, v)/dx."""
    x = np.asarray(x, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    return model.score_at(x) * kernel.pair_eval(x, v) + kernel.grad_x(x, v)


def feature_matrix(model: ScoredModel, sample, locations: TestLocations):
    """All feature rows tau(x_i), an (n, d*J) array.

    Column layout follows vec() of the (d, J) feature block: index
    ``i + d*j`` holds coordinate i evaluated at location j, scaled by
    1/sqrt(dJ).
    """
    X = as_data(sample)
    n, d = X.shape
    V = locations.V
    J = V.shape[0]
    if V.shape[1] != d:
        raise InvalidModelError("locations and sample dimension mismatch")
    s2 = locations.kernel.bandwidth_sq
    S = model.score_at(X)  # (n, d)
    K = locations.kernel.eval(X, V)  # (n, J)
    scale = 1.0 / np.sqrt(d * J)
    T = np.empty((n, d * J))
    for j in range(J):
        diff = X - V[j]
        T[:, j * d:(j + 1) * d] = scale * K[:, j:j + 1] * (S - diff / s2)
    return T


def tau(model: ScoredModel, x, locations: TestLocations):
    """Stacked feature vector tau(x) in R^{dJ} for a single point."""
    return feature_matrix(model, np.atleast_2d(np.asarray(x, dtype=float)), locations)[0]


def fssd2_ustat(model: ScoredModel, sample, locations: TestLocations):
    """Unbiased U-statistic estimate of FSSD^2, computed in O(n d J)."""
    T = feature_matrix(model, sample, locations)
    n = T.shape[0]
    if n < 2:
        raise SampleSizeError("FSSD needs n >= 2")
    total = T.sum(axis=0)
    cross = float(total @ total) - float((T**2).sum())
    return cross / (n * (n - 1))


def moments(model: ScoredModel, sample, locations: TestLocations):
    """Feature rows with their mean and plug-in (1/n) covariance."""
    T = feature_matrix(model, sample, locations)
    if T.shape[0] < 2:
        raise SampleSizeError("moments need n >= 2")
    mu = T.mean(axis=0)
    centered = T - mu
    sigma = centered.T @ centered / T.shape[0]
    sigma = 0.5 * (sigma + sigma.T)
    return SteinFeatures(tau_rows=T, mu_hat=mu, sigma_q_hat=sigma)


def sigma_h1_hat(features: SteinFeatures):
    """Plug-in alternative-distribution variance 4 mu^T Sigma_q mu, clamped at 0."""
    val = 4.0 * float(features.mu_hat @ features.sigma_q_hat @ features.mu_hat)
    return max(val, 0.0)


def hp(model: ScoredModel, x, y, kernel: GaussKernel):
    """The KSD U-statistic kernel h_p(x, y); symmetric in its arguments."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    sx = model.score_at(x)
    sy = model.score_at(y)
    k = kernel.pair_eval(x, y)
    return float(
        sx @ sy * k
        + sy @ kernel.grad_x(x, y)
        + sx @ kernel.grad_y(x, y)
        + kernel.cross_trace(x, y)
    )


def _hp_block(kernel, Xa, Sa, Xb, Sb):
    """h_p evaluated on the cross-block (len(Xa), len(Xb))."""
    s2 = kernel.bandwidth_sq
    d = Xa.shape[1]
    K = kernel.eval(Xa, Xb)
    sq = (
        (Xa**2).sum(axis=1)[:, None]
        - 2.0 * Xa @ Xb.T
        + (Xb**2).sum(axis=1)[None, :]
    )
    np.maximum(sq, 0.0, out=sq)
    term1 = (Sa @ Sb.T) * K
    # s_p(y)^T grad_x k = -K * (x - y).s(y) / s2, expanded without pair loops
    xa_sb = Xa @ Sb.T
    yb_sb = (Xb * Sb).sum(axis=1)
    term2 = -K * (xa_sb - yb_sb[None, :]) / s2
    xb_sa = Sa @ Xb.T
    ya_sa = (Xa * Sa).sum(axis=1)
    term3 = K * (ya_sa[:, None] - xb_sa) / s2
    term4 = K * (d / s2 - sq / s2**2)
    return term1 + term2 + term3 + term4


def hp_gram(model: ScoredModel, sample, kernel: GaussKernel):
    """Full (n, n) matrix of h_p(x_i, x_j)."""
    X = as_data(sample)
    S = model.score_at(X)
    H = _hp_block(kernel, X, S, X, S)
    return 0.5 * (H + H.T)


def ksd2_ustat(model: ScoredModel, sample, kernel: GaussKernel, block=2000):
    """Quadratic-time unbiased U-statistic estimate of KSD^2.

    Accumulated in row blocks so large n does not materialize the full Gram
    matrix.
    """
    X = as_data(sample)
    n = X.shape[0]
    if n < 2:
        raise SampleSizeError("KSD needs n >= 2")
    S = model.score_at(X)
    off_diag = 0.0
    for start in range(0, n, block):
        stop = min(start + block, n)
        Hb = _hp_block(kernel, X[start:stop], S[start:stop], X, S)
        off_diag += float(Hb.sum())
        off_diag -= float(np.diag(Hb[:, start:stop]).sum())
    return off_diag / (n * (n - 1))


def lks2_stat(model: ScoredModel, sample, kernel: GaussKernel):
    """Linear-time incomplete U-statistic over disjoint consecutive pairs.

    Returns the pair mean (the LKS estimate of KSD^2) together with the pair
    sample standard deviation used for its Gaussian null.  An odd final
    observation is dropped.
    """
    X = as_data(sample)
    n = X.shape[0]
    if n < 2:
        raise SampleSizeError("LKS needs n >= 2")
    m = n // 2
    Xa = X[0:2 * m:2]
    Xb = X[1:2 * m:2]
    Sa = model.score_at(Xa)
    Sb = model.score_at(Xb)
    s2 = kernel.bandwidth_sq
    d = X.shape[1]
    diff = Xa - Xb
    sq = (diff**2).sum(axis=1)
    K = np.exp(-sq / (2.0 * s2))
    vals = (
        (Sa * Sb).sum(axis=1) * K
        - K * (diff * Sb).sum(axis=1) / s2
        + K * (diff * Sa).sum(axis=1) / s2
        + K * (d / s2 - sq / s2**2)
    )
    value = float(vals.mean())
    pair_std = float(vals.std(ddof=1)) if m > 1 else 0.0
    return LksStat(value=value, pair_std=pair_std, n_pairs=m)
