"""Null-distribution simulation, thresholds, and the three test procedures."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import norm

from .exceptions import ConfigError, DegenerateSampleError, SampleSizeError
from .kernel import GaussKernel
from .models import ScoredModel, as_data
from .stein import (
    SteinFeatures,
    TestLocations,
    fssd2_ustat,
    hp_gram,
    ksd2_ustat,
    lks2_stat,
    moments,
)

__all__ = [
    "NullSpec",
    "TestResult",
    "null_eigs",
    "simulate_null",
    "threshold",
    "fssd_test",
    "ksd_test",
    "lks_test",
]

DEFAULT_NULL_DRAWS = 10_000
DEFAULT_BOOTSTRAP = 500


@dataclass(frozen=True)
class NullSpec:
    """Eigenvalues of the plug-in feature covariance plus simulation controls."""

    eigenvalues: np.ndarray
    n_draws: int
    seed: int

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=float).ravel()
        object.__setattr__(self, "eigenvalues", ev)
        if (ev < 0).any():
            raise ConfigError("null eigenvalues must be nonnegative")
        if (np.diff(ev) > 0).any():
            raise ConfigError("null eigenvalues must be sorted descending")
        if self.n_draws < 100:
            raise ConfigError("need at least 100 null draws")


@dataclass
class TestResult:
    """Outcome of one goodness-of-fit test."""

    statistic: float
    threshold: float
    p_value: float
    reject: bool
    alpha: float
    method: str
    wall_time: float
    seeds: dict = field(default_factory=dict)

    def to_json(self):
        doc = {
            "statistic": self.statistic,
            "threshold": self.threshold,
            "p_value": self.p_value,
            "reject": bool(self.reject),
            "alpha": self.alpha,
            "method": self.method,
            "wall_time": self.wall_time,
            "seeds": self.seeds,
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


def null_eigs(features: SteinFeatures):
    """All eigenvalues of the plug-in covariance, clamped at 0, descending."""
    sigma = features.sigma_q_hat
    if not np.allclose(sigma, sigma.T, atol=1e-8):
        raise ConfigError("feature covariance must be symmetric")
    vals = np.linalg.eigvalsh(sigma)
    return np.sort(np.maximum(vals, 0.0))[::-1]


def simulate_null(spec: NullSpec):
    """Sorted i.i.d. draws of sum_i (Z_i^2 - 1) nu_i with Z_i standard normal."""
    rng = np.random.default_rng(spec.seed)
    ev = spec.eigenvalues
    Z = rng.standard_normal((spec.n_draws, ev.size))
    draws = (Z**2 - 1.0) @ ev
    return np.sort(draws)


def threshold(null_draws, alpha):
    """Empirical (1 - alpha)-quantile with the conservative upper rule."""
    draws = np.sort(np.asarray(null_draws, dtype=float).ravel())
    m = draws.size
    if m == 0:
        raise ConfigError("empty null sample")
    if not 0.0 < alpha < 1.0:
        raise ConfigError("alpha must lie in (0, 1)")
    k = min(int(np.floor((1.0 - alpha) * m)) + 1, m)
    return float(draws[k - 1])


def fssd_test(
    model: ScoredModel,
    sample,
    locations: TestLocations,
    alpha=0.05,
    n_draws=DEFAULT_NULL_DRAWS,
    seed=0,
):
    """FSSD test: statistic n * FSSD^2 against the simulated weighted-chi-square null."""
    start = time.perf_counter()
    X = as_data(sample)
    n = X.shape[0]
    stat = n * fssd2_ustat(model, X, locations)
    feats = moments(model, X, locations)
    ev = null_eigs(feats)
    draws = simulate_null(NullSpec(eigenvalues=ev, n_draws=n_draws, seed=seed))
    thr = threshold(draws, alpha)
    p_value = float(np.mean(draws >= stat))
    return TestResult(
        statistic=float(stat),
        threshold=thr,
        p_value=p_value,
        reject=bool(stat > thr),
        alpha=alpha,
        method="fssd",
        wall_time=time.perf_counter() - start,
        seeds={"null_seed": int(seed)},
    )


def ksd_test(
    model: ScoredModel,
    sample,
    kernel: GaussKernel,
    alpha=0.05,
    n_boot=DEFAULT_BOOTSTRAP,
    seed=0,
):
    """Quadratic-time KSD test with a multinomial weighted bootstrap null.

    Each replicate draws w ~ Multinomial(n; 1/n, ..., 1/n)/n and evaluates
    sum_{i != j} (w_i - 1/n)(w_j - 1/n) h_p(x_i, x_j) on the cached Gram
    matrix.
    """
    start = time.perf_counter()
    X = as_data(sample)
    n = X.shape[0]
    if n < 2:
        raise SampleSizeError("KSD test needs n >= 2")
    H = hp_gram(model, X, kernel)
    diag = np.diag(H)
    stat = float((H.sum() - diag.sum()) / (n * (n - 1)))
    rng = np.random.default_rng(seed)
    boots = np.empty(n_boot)
    probs = np.full(n, 1.0 / n)
    for b in range(n_boot):
        u = rng.multinomial(n, probs) / n - 1.0 / n
        boots[b] = u @ H @ u - float((u**2) @ diag)
    thr = threshold(boots, alpha)
    p_value = float(np.mean(boots >= stat))
    return TestResult(
        statistic=stat,
        threshold=thr,
        p_value=p_value,
        reject=bool(stat > thr),
        alpha=alpha,
        method="ksd",
        wall_time=time.perf_counter() - start,
        seeds={"bootstrap_seed": int(seed)},
    )


def lks_test(model: ScoredModel, sample, kernel: GaussKernel, alpha=0.05):
    """Linear-time KSD test: studentized pair mean against the one-sided normal."""
    start = time.perf_counter()
    X = as_data(sample)
    if X.shape[0] < 4:
        raise SampleSizeError("LKS test needs n >= 4")
    pair = lks2_stat(model, X, kernel)
    if pair.pair_std <= 0:
        raise DegenerateSampleError("pair evaluations have zero variance")
    stat = float(np.sqrt(pair.n_pairs) * pair.value / pair.pair_std)
    thr = float(norm.ppf(1.0 - alpha))
    p_value = float(norm.sf(stat))
    return TestResult(
        statistic=stat,
        threshold=thr,
        p_value=p_value,
        reject=bool(stat > thr),
        alpha=alpha,
        method="lks",
        wall_time=time.perf_counter() - start,
        seeds={},
    )
