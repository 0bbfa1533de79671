"""Power-criterion evaluation and gradient-ascent tuning of test locations.

The criterion FSSD^2_hat / (sigma_H1_hat + gamma) is maximized over the J
location vectors and the log of the kernel bandwidth (log-parameterized so the
bandwidth stays positive).  The gradient is analytic: both the statistic and
the variance estimate are quadratic forms in the feature rows, so the chain
rule only needs the derivatives of each feature row with respect to the
locations and the bandwidth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .exceptions import ConfigError, SampleSizeError
from .kernel import GaussKernel, median_heuristic
from .models import Sample, ScoredModel, as_data
from .stein import TestLocations, feature_matrix

__all__ = [
    "OptimizerConfig",
    "power_criterion",
    "power_criterion_grad",
    "optimize_locations",
    "split",
    "approx_power",
]


@dataclass(frozen=True)
class OptimizerConfig:
    gamma: float = 1e-4
    step_size: float = 0.1
    max_iters: int = 200
    train_fraction: float = 0.2
    seed: int = 0
    max_halvings: int = 10

    def __post_init__(self):
        if self.gamma < 0:
            raise ConfigError("gamma must be >= 0")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must lie in (0, 1)")
        if self.step_size <= 0:
            raise ConfigError("step_size must be positive")


def _criterion_parts(model, X, locations):
    """Feature rows plus the statistic and variance built from them."""
    T = feature_matrix(model, X, locations)
    n = T.shape[0]
    total = T.sum(axis=0)
    fssd2 = (float(total @ total) - float((T**2).sum())) / (n * (n - 1))
    mu = total / n
    proj = T @ mu
    sigma_h1 = 4.0 * (float((proj**2).mean()) - float(mu @ mu) ** 2)
    sigma_h1 = max(sigma_h1, 0.0)
    return T, fssd2, sigma_h1


def power_criterion(model: ScoredModel, sample, locations: TestLocations, gamma=1e-4):
    """FSSD^2_hat / (sqrt(sigma_H1_hat) + gamma)."""
    X = as_data(sample)
    if X.shape[0] < 2:
        raise SampleSizeError("power criterion needs n >= 2")
    _, fssd2, sigma_h1 = _criterion_parts(model, X, locations)
    return fssd2 / (np.sqrt(sigma_h1) + gamma)


def _rows_backprop(model, X, locations, G):
    """Pull a gradient on the feature rows back to (V, log bandwidth_sq).

    G is (n, dJ), the derivative of the objective with respect to each feature
    row entry.  Returns (grad_V (J, d), grad_log_s2 scalar).
    """
    V = locations.V
    J, d = V.shape
    s2 = locations.kernel.bandwidth_sq
    S = model.score_at(X)
    K = locations.kernel.eval(X, V)  # (n, J)
    scale = 1.0 / np.sqrt(d * J)
    grad_V = np.empty((J, d))
    grad_s2 = 0.0
    for j in range(J):
        diff = X - V[j]  # (n, d)
        A = S - diff / s2  # bracket of the feature block
        Gb = G[:, j * d:(j + 1) * d]  # (n, d)
        GA = (Gb * A).sum(axis=1)  # (n,)
        Kj = K[:, j]
        # d tau_a / d v_b = scale * K * (diff_b / s2 * A_a + delta_ab / s2)
        grad_V[j] = (scale / s2) * (
            (Kj * GA) @ diff + Kj @ Gb
        )
        # d tau_a / d s2 = scale * K * (||diff||^2 / (2 s2^2) * A_a + diff_a / s2^2)
        sqn = (diff**2).sum(axis=1)
        grad_s2 += (scale / s2**2) * float(
            (Kj * GA * 0.5 * sqn).sum() + (Kj * (Gb * diff).sum(axis=1)).sum()
        )
    return grad_V, s2 * grad_s2


def power_criterion_grad(
    model: ScoredModel, sample, locations: TestLocations, gamma=1e-4
):
    """Analytic gradient of the power criterion.

    Returns a flat vector of length J*d + 1: the location entries in row-major
    order followed by the derivative in log bandwidth_sq.
    """
    X = as_data(sample)
    n = X.shape[0]
    if n < 2:
        raise SampleSizeError("power criterion needs n >= 2")
    T, fssd2, sigma_h1 = _criterion_parts(model, X, locations)
    mu = T.mean(axis=0)
    denom = np.sqrt(sigma_h1) + gamma

    # d fssd2 / d T_i = 2 (n mu - T_i) / (n (n-1))
    G_f = 2.0 * (n * mu[None, :] - T) / (n * (n - 1))
    # sigma_h1 = 4 [ mean_i (T_i . mu)^2 - ||mu||^4 ]
    proj = T @ mu
    row_const = (2.0 / n**2) * (proj @ T) - (4.0 / n) * float(mu @ mu) * mu
    G_s = 4.0 * ((2.0 / n) * proj[:, None] * mu[None, :] + row_const[None, :])
    # sqrt is not differentiable at 0; when the variance is at cancellation
    # noise level the 1/sqrt(sigma) factor only amplifies rounding error, so
    # take the zero subgradient for that term instead
    if sigma_h1 > 1e-24:
        G = G_f / denom - (fssd2 / denom**2) * (0.5 / np.sqrt(sigma_h1)) * G_s
    else:
        G = G_f / denom
    grad_V, grad_log_s2 = _rows_backprop(model, X, locations, G)
    return np.concatenate([grad_V.ravel(), [grad_log_s2]])


def split(sample, train_fraction=0.2, seed=0):
    """Seeded disjoint random partition into (train, test) samples."""
    X = as_data(sample)
    n = X.shape[0]
    if n < 4:
        raise SampleSizeError("splitting needs n >= 4")
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError("train_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_train = int(round(train_fraction * n))
    n_train = min(max(n_train, 2), n - 2)
    tr, te = perm[:n_train], perm[n_train:]
    return Sample(data=X[tr], seed=seed), Sample(data=X[te], seed=seed)


def _pack(V, log_s2):
    return np.concatenate([V.ravel(), [log_s2]])


# Bandwidth kept inside [e^LOG_S2_MIN, e^LOG_S2_MAX] during ascent; steps that
# would leave the box are projected back instead of overflowing exp().
LOG_S2_MIN, LOG_S2_MAX = np.log(1e-6), np.log(1e6)


def _unpack(theta, J, d):
    return theta[:-1].reshape(J, d), float(np.clip(theta[-1], LOG_S2_MIN, LOG_S2_MAX))


def optimize_locations(model: ScoredModel, train, J, config: OptimizerConfig):
    """Gradient ascent on the power criterion with backtracking.

    Locations start at draws from a normal distribution fitted to the training
    data; the bandwidth starts at the squared median heuristic.  Returns the
    best iterate seen.
    """
    X = as_data(train)
    n, d = X.shape
    if n < 2 * J:
        raise SampleSizeError(f"need n >= 2J training points, got n={n}, J={J}")
    rng = np.random.default_rng(config.seed)
    mean = X.mean(axis=0)
    cov = np.cov(X.T).reshape(d, d) + 1e-8 * np.eye(d)
    V = rng.multivariate_normal(mean, cov, size=J)
    log_s2 = np.log(median_heuristic(X) ** 2)

    def objective(theta):
        Vt, ls2 = _unpack(theta, J, d)
        loc = TestLocations(V=Vt, kernel=GaussKernel(float(np.exp(ls2))))
        return power_criterion(model, X, loc, config.gamma), loc

    theta = _pack(V, log_s2)
    value, loc = objective(theta)
    best_value, best_loc = value, loc
    step = config.step_size
    for _ in range(config.max_iters):
        grad = power_criterion_grad(model, X, loc, config.gamma)
        accepted = False
        trial_step = step
        for halving in range(config.max_halvings):
            cand = theta + trial_step * grad
            cand[-1] = np.clip(cand[-1], LOG_S2_MIN, LOG_S2_MAX)
            try:
                cand_value, cand_loc = objective(cand)
            except Exception:
                cand_value = -np.inf
            if np.isfinite(cand_value) and cand_value >= value:
                theta, value, loc = cand, cand_value, cand_loc
                accepted = True
                # grow the step after a clean accept, keep the reduction otherwise
                step = trial_step * (2.0 if halving == 0 else 1.0)
                break
            trial_step *= 0.5
        if not accepted:
            break
        if value > best_value:
            best_value, best_loc = value, loc
    return best_loc


def approx_power(r, n, fssd2, sigma_h1):
    """Large-n normal approximation of P(n * FSSD^2_hat > r) under H1."""
    if sigma_h1 <= 0:
        raise ConfigError("sigma_h1 must be positive")
    sigma = np.sqrt(sigma_h1)
    arg = r / (np.sqrt(n) * sigma) - np.sqrt(n) * fssd2 / sigma
    return float(1.0 - norm.cdf(arg))
