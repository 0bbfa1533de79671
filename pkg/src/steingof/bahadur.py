"""Closed-form approximate Bahadur slopes for the Gaussian mean-shift setting.

All formulas are evaluated in log-space before exponentiating, since the
slope of the location-based statistic carries a factor exp(v^2 / (s2 + 2))
that overflows for remote test locations.  Monte Carlo estimators of the
generic slope definitions are included as cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, UndefinedEfficiencyError
from .kernel import GaussKernel
from .models import ScoredModel, as_data, sample_standard
from .stein import TestLocations, feature_matrix, lks2_stat

__all__ = [
    "SlopeConfig",
    "fssd_slope_gauss",
    "lks_slope_gauss",
    "ksd_population_gauss",
    "efficiency_gauss",
    "efficiency_bound",
    "slope_generic_mc",
]


@dataclass(frozen=True)
class SlopeConfig:
    """Gaussian mean-shift problem: p = N(0,1), q = N(mu_q, sigma_q_sq), one
    test location v, separate bandwidths for the two statistics."""

    mu_q: float
    sigma_q_sq: float = 1.0
    v: float = 0.0
    sigma_k_sq: float = 1.0
    kappa_sq: float = 1.0

    def __post_init__(self):
        if self.sigma_q_sq <= 0 or self.sigma_k_sq <= 0 or self.kappa_sq <= 0:
            raise ConfigError("variances and bandwidths must be positive")


def fssd_slope_gauss(cfg: SlopeConfig):
    """Closed-form slope of the location statistic under the Gaussian shift."""
    s2 = cfg.sigma_k_sq
    sq = cfg.sigma_q_sq
    v = cfg.v
    mu = cfg.mu_q
    lin = (s2 + 1.0) * mu + v * (sq - 1.0)
    if lin == 0.0:
        return 0.0
    log_num = (
        1.5 * np.log(s2)
        + 2.5 * np.log(s2 + 2.0)
        + v**2 / (s2 + 2.0)
        - (v - mu) ** 2 / (s2 + sq)
        + 2.0 * np.log(abs(lin))
    )
    log_den = 3.0 * np.log(s2 + sq) + np.log(
        s2**3 + 4.0 * s2**2 + (v**2 + 5.0) * s2 + 2.0
    )
    log_slope = log_num - log_den
    if log_slope > 700.0:
        return float("inf")
    return float(np.exp(log_slope))


def _log_lks_slope(mu_q, sigma_q_sq, kappa_sq):
    k2 = kappa_sq
    sq = sigma_q_sq
    num_bracket = mu_q**2 * (k2 + 2.0 * sq) + (sq - 1.0) ** 2
    if num_bracket == 0.0:
        return -np.inf
    poly = k2**4 + 8.0 * k2**3 + 21.0 * k2**2 + 20.0 * k2 + 12.0
    return (
        2.5 * np.log(k2)
        + 2.5 * np.log(k2 + 4.0)
        + 2.0 * np.log(num_bracket)
        - np.log(2.0)
        - np.log(poly)
        - 3.0 * np.log(k2 + 2.0 * sq)
    )


def lks_slope_gauss(mu_q, sigma_q_sq, kappa_sq):
    """Closed-form slope of the pairwise linear-time statistic."""
    if sigma_q_sq <= 0 or kappa_sq <= 0:
        raise ConfigError("sigma_q_sq and kappa_sq must be positive")
    return float(np.exp(_log_lks_slope(mu_q, sigma_q_sq, kappa_sq)))


def ksd_population_gauss(mu_q, sigma_q_sq, kappa_sq):
    """Population squared Stein discrepancy for p = N(0,1), q = N(mu_q, sigma_q_sq)."""
    if sigma_q_sq <= 0 or kappa_sq <= 0:
        raise ConfigError("sigma_q_sq and kappa_sq must be positive")
    k2 = kappa_sq
    sq = sigma_q_sq
    num = mu_q**2 * (k2 + 2.0 * sq) + (sq - 1.0) ** 2
    return float(num / ((k2 + 2.0 * sq) * np.sqrt(2.0 * sq / k2 + 1.0)))


def efficiency_gauss(cfg: SlopeConfig):
    """Ratio of the two closed-form slopes (relative efficiency)."""
    if cfg.mu_q == 0.0 and cfg.sigma_q_sq == 1.0:
        raise UndefinedEfficiencyError("both slopes vanish at the null")
    c_fssd = fssd_slope_gauss(cfg)
    log_lks = _log_lks_slope(cfg.mu_q, cfg.sigma_q_sq, cfg.kappa_sq)
    if c_fssd == 0.0 or not np.isfinite(log_lks):
        raise UndefinedEfficiencyError("a slope vanished; ratio undefined")
    return float(np.exp(np.log(c_fssd) - log_lks))


def efficiency_bound(mu_q):
    """Lower bound on the efficiency at sigma_k_sq=1, v=2*mu_q: the ratio of the
    specialized location slope to the bandwidth-independent supremum mu_q^4/2."""
    if mu_q == 0.0:
        raise UndefinedEfficiencyError("bound undefined at mu_q = 0")
    m2 = mu_q**2
    return float(9.0 * np.sqrt(3.0) * np.exp(5.0 * m2 / 6.0) / (m2 * (4.0 * m2 + 12.0)))


def slope_generic_mc(
    model_p: ScoredModel,
    sample_p,
    sample_q,
    statistic,
    locations: TestLocations = None,
    kernel: GaussKernel = None,
):
    """Monte Carlo estimate of a generic slope definition, used as an oracle.

    statistic "fssd": squared norm of the mean feature under q over the top
    eigenvalue of the second-moment feature matrix under p (needs
    ``locations``).
    statistic "lks": half the squared pair-kernel mean under q over the
    pair-kernel second moment under p (needs ``kernel``).
    """
    Xp = as_data(sample_p)
    Xq = as_data(sample_q)
    if statistic == "fssd":
        if locations is None:
            raise ConfigError("fssd slope needs locations")
        Tq = feature_matrix(model_p, Xq, locations)
        fssd2 = float(Tq.mean(axis=0) @ Tq.mean(axis=0))
        Tp = feature_matrix(model_p, Xp, locations)
        second = Tp.T @ Tp / Tp.shape[0]
        omega1 = float(np.linalg.eigvalsh(second).max())
        return fssd2 / omega1
    if statistic == "lks":
        if kernel is None:
            raise ConfigError("lks slope needs a kernel")
        mean_q = lks2_stat(model_p, Xq, kernel).value
        pair_p = lks2_stat(model_p, Xp, kernel)
        second_p = pair_p.pair_std**2 * (pair_p.n_pairs - 1) / pair_p.n_pairs + (
            pair_p.value**2
        )
        return 0.5 * mean_q**2 / second_p
    raise ConfigError(f"unknown statistic: {statistic!r}")
