"""Benchmark harness: experiment configurations, trial protocol, CSV I/O.

A benchmark run draws a fresh q-sample per trial, applies each requested
method to the same sample, and aggregates rejection counts and timings.
Every per-trial random stream is derived from (master_seed, trial index), so
results are byte-identical no matter how many workers execute the trials.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field, replace

import numpy as np
from joblib import Parallel, delayed

from .exceptions import ConfigError, IngestionError
from .kernel import GaussKernel, median_heuristic
from .models import (
    GmmParams,
    RbmParams,
    Sample,
    ScoredModel,
    as_data,
    gaussian_model,
    gmm_model,
    rbm_model,
    sample_rbm_gibbs,
    sample_standard,
)
from .optimize import OptimizerConfig, optimize_locations, power_criterion, split
from .stein import TestLocations
from .testing import fssd_test, ksd_test, lks_test

__all__ = [
    "RunSpec",
    "BenchmarkRow",
    "run_benchmark",
    "run_power_vs_j",
    "run_runtime_scaling",
    "run_surface_scan",
    "ingest_csv",
    "benchmark_csv",
]

PROBLEMS = (
    "same_gauss",
    "gauss_vs_laplace",
    "gauss_mean_shift",
    "gauss_var_diff",
    "gmm_vs_gauss",
    "rbm_perturb_all",
    "rbm_perturb_one",
)
METHODS = ("fssd_opt", "fssd_rand", "ksd", "lks")


@dataclass(frozen=True)
class RunSpec:
    problem: str
    methods: tuple
    n: int
    d: int
    trials: int
    alpha: float = 0.05
    J: int = 5
    problem_params: dict = field(default_factory=dict)
    master_seed: int = 0
    train_fraction: float = 0.2
    n_draws: int = 10_000
    n_boot: int = 500
    burn_in: int = 2000

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        bad = []
        if self.problem not in PROBLEMS:
            bad.append(f"problem={self.problem!r}")
        if not self.methods or any(m not in METHODS for m in self.methods):
            bad.append(f"methods={self.methods!r}")
        if self.trials < 1:
            bad.append(f"trials={self.trials}")
        if self.n < 4:
            bad.append(f"n={self.n}")
        if not 0.0 < self.alpha < 1.0:
            bad.append(f"alpha={self.alpha}")
        if bad:
            raise ConfigError("invalid run spec fields: " + ", ".join(bad))

    @classmethod
    def from_dict(cls, doc):
        return cls(**doc)


@dataclass(frozen=True)
class BenchmarkRow:
    problem: str
    method: str
    param_name: str
    param_value: float
    rejection_rate: float
    mean_wall_time: float
    trials: int


# ---------------------------------------------------------------------------
# problem instances


def _problem_instance(spec: RunSpec, trial_seed_seq):
    """Return (model_p, draw_q(n, child_seed_seq) -> Sample) for one trial."""
    d = spec.d
    pp = spec.problem_params
    if spec.problem == "same_gauss":
        model = gaussian_model(np.zeros(d), 1.0)
        draw = lambda n, ss: sample_standard(
            "gauss", {"mean": np.zeros(d), "cov": 1.0}, n, ss
        )
        return model, draw
    if spec.problem == "gauss_vs_laplace":
        model = gaussian_model(np.zeros(d), 1.0)
        draw = lambda n, ss: sample_standard("laplace_product", {"d": d}, n, ss)
        return model, draw
    if spec.problem == "gauss_mean_shift":
        mu_q = float(pp.get("mu_q", 0.5))
        model = gaussian_model(np.zeros(d), 1.0)
        mean_q = np.zeros(d)
        mean_q[0] = mu_q
        draw = lambda n, ss: sample_standard("gauss", {"mean": mean_q, "cov": 1.0}, n, ss)
        return model, draw
    if spec.problem == "gauss_var_diff":
        model = gaussian_model(np.zeros(d), 1.0)
        var_q = np.ones(d)
        var_q[0] = float(pp.get("var_first", 2.0))
        draw = lambda n, ss: sample_standard(
            "gauss", {"mean": np.zeros(d), "cov": var_q}, n, ss
        )
        return model, draw
    if spec.problem == "gmm_vs_gauss":
        model = gaussian_model(np.zeros(d), 1.0)
        w = float(pp.get("mix_weight", 0.1))
        s = float(pp.get("mix_sd", 0.1))
        gp = GmmParams(
            weights=[1.0 - w, w],
            means=np.zeros((2, d)),
            covariances=np.array([np.eye(d), s**2 * np.eye(d)]),
        )
        draw = lambda n, ss: sample_standard("gmm", gp, n, ss)
        return model, draw
    if spec.problem in ("rbm_perturb_all", "rbm_perturb_one"):
        d_h = int(pp.get("d_h", 10))
        rng = np.random.default_rng(trial_seed_seq.spawn(1)[0])
        B = rng.choice([-1.0, 1.0], size=(d, d_h))
        b = rng.standard_normal(d)
        c = rng.standard_normal(d_h)
        model = rbm_model(RbmParams(B=B, b=b, c=c))
        Bq = B.copy()
        if spec.problem == "rbm_perturb_all":
            sigma_per = float(pp.get("sigma_per", 0.0))
            if sigma_per > 0:
                Bq = Bq + sigma_per * rng.standard_normal((d, d_h))
        else:
            sigma_per = float(pp.get("sigma_per", 0.1))
            Bq[0, 0] += sigma_per * rng.standard_normal()
        q_params = RbmParams(B=Bq, b=b, c=c)
        draw = lambda n, ss: sample_rbm_gibbs(q_params, n, spec.burn_in, ss)
        return model, draw
    raise ConfigError(f"unknown problem: {spec.problem!r}")


# ---------------------------------------------------------------------------
# methods


def _random_locations(X, J, rng):
    """Draws from a normal distribution fitted to the data."""
    d = X.shape[1]
    mean = X.mean(axis=0)
    cov = np.cov(X.T).reshape(d, d) + 1e-8 * np.eye(d)
    return rng.multivariate_normal(mean, cov, size=J)


def run_method(method, model, sample, spec: RunSpec, seed_seq):
    """Apply one test method; returns its TestResult.  Timing covers the test
    (and optimization for fssd_opt), never the data draw."""
    children = seed_seq.spawn(3)
    null_seed = int(children[0].generate_state(1)[0])
    aux_seed = int(children[1].generate_state(1)[0])
    X = as_data(sample)
    if method == "fssd_opt":
        start = time.perf_counter()
        train, test = split(X, spec.train_fraction, aux_seed)
        config = OptimizerConfig(
            train_fraction=spec.train_fraction, seed=aux_seed
        )
        locations = optimize_locations(model, train, spec.J, config)
        opt_time = time.perf_counter() - start
        result = fssd_test(
            model, test, locations, spec.alpha, spec.n_draws, null_seed
        )
        result.method = "fssd_opt"
        result.wall_time += opt_time
        result.seeds["split_seed"] = aux_seed
        return result
    if method == "fssd_rand":
        start = time.perf_counter()
        rng = np.random.default_rng(aux_seed)
        V = _random_locations(X, spec.J, rng)
        kernel = GaussKernel(median_heuristic(X) ** 2)
        locations = TestLocations(V=V, kernel=kernel)
        result = fssd_test(model, X, locations, spec.alpha, spec.n_draws, null_seed)
        result.method = "fssd_rand"
        result.wall_time = time.perf_counter() - start
        return result
    if method == "ksd":
        kernel = GaussKernel(median_heuristic(X) ** 2)
        return ksd_test(model, X, kernel, spec.alpha, spec.n_boot, null_seed)
    if method == "lks":
        kernel = GaussKernel(median_heuristic(X) ** 2)
        return lks_test(model, X, kernel, spec.alpha)
    raise ConfigError(f"unknown method: {method!r}")


def _run_trial(spec: RunSpec, trial):
    root = np.random.SeedSequence(entropy=spec.master_seed, spawn_key=(trial,))
    data_seq, *method_seqs = root.spawn(1 + len(spec.methods))
    model, draw = _problem_instance(spec, data_seq)
    sample = draw(spec.n, data_seq.spawn(1)[0])
    out = {}
    for method, mseq in zip(spec.methods, method_seqs):
        res = run_method(method, model, sample, spec, mseq)
        out[method] = (bool(res.reject), float(res.wall_time))
    return out


def _param_label(spec: RunSpec):
    if spec.problem in ("rbm_perturb_all", "rbm_perturb_one"):
        return "sigma_per", float(
            spec.problem_params.get(
                "sigma_per", 0.0 if spec.problem == "rbm_perturb_all" else 0.1
            )
        )
    return "n", float(spec.n)


def run_benchmark(spec: RunSpec, workers=1):
    """Full trial protocol; returns one BenchmarkRow per method."""
    if workers == 1:
        trial_results = [_run_trial(spec, t) for t in range(spec.trials)]
    else:
        trial_results = Parallel(n_jobs=workers)(
            delayed(_run_trial)(spec, t) for t in range(spec.trials)
        )
    name, value = _param_label(spec)
    rows = []
    for method in spec.methods:
        rejects = [trial_results[t][method][0] for t in range(spec.trials)]
        times = [trial_results[t][method][1] for t in range(spec.trials)]
        rows.append(
            BenchmarkRow(
                problem=spec.problem,
                method=method,
                param_name=name,
                param_value=value,
                rejection_rate=sum(rejects) / spec.trials,
                mean_wall_time=float(np.mean(times)),
                trials=spec.trials,
            )
        )
    return rows


def run_power_vs_j(spec: RunSpec, j_values, workers=1):
    """One benchmark per J with a 50% train/test split."""
    if not j_values:
        raise ConfigError("need a nonempty J list")
    rows = []
    for J in j_values:
        sub = replace(spec, J=int(J), train_fraction=0.5)
        for row in run_benchmark(sub, workers=workers):
            rows.append(
                BenchmarkRow(
                    problem=row.problem,
                    method=row.method,
                    param_name="J",
                    param_value=float(J),
                    rejection_rate=row.rejection_rate,
                    mean_wall_time=row.mean_wall_time,
                    trials=row.trials,
                )
            )
    return rows


def run_runtime_scaling(spec: RunSpec, n_values, workers=1):
    """Median per-test wall time against sample size for each method."""
    if list(n_values) != sorted(n_values):
        raise ConfigError("n_values must be increasing")
    rows = []
    for n in n_values:
        sub = replace(spec, n=int(n))
        if workers == 1:
            trial_results = [_run_trial(sub, t) for t in range(sub.trials)]
        else:
            trial_results = Parallel(n_jobs=workers)(
                delayed(_run_trial)(sub, t) for t in range(sub.trials)
            )
        for method in sub.methods:
            times = [trial_results[t][method][1] for t in range(sub.trials)]
            rejects = [trial_results[t][method][0] for t in range(sub.trials)]
            rows.append(
                BenchmarkRow(
                    problem=sub.problem,
                    method=method,
                    param_name="n",
                    param_value=float(n),
                    rejection_rate=sum(rejects) / sub.trials,
                    mean_wall_time=float(np.median(times)),
                    trials=sub.trials,
                )
            )
    return rows


def run_surface_scan(model: ScoredModel, sample, grid, bandwidth_sq=None, gamma=1e-4):
    """Power criterion over a rectangular grid of a single test location.

    ``grid`` is a per-dimension list of (lo, hi, count) triples, d in {1, 2}.
    Returns (rows, argmax_row) where each row is (*v, criterion).
    """
    X = as_data(sample)
    d = X.shape[1]
    if d > 2 or len(grid) != d:
        raise ConfigError(
            "surface scans support d in {1, 2}; slice higher-dimensional data first"
        )
    if bandwidth_sq is None:
        bandwidth_sq = median_heuristic(X) ** 2
    kernel = GaussKernel(bandwidth_sq)
    axes = [np.linspace(lo, hi, int(count)) for lo, hi, count in grid]
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    rows = np.empty((points.shape[0], d + 1))
    for i, v in enumerate(points):
        loc = TestLocations(V=v[None, :], kernel=kernel)
        rows[i, :d] = v
        rows[i, d] = power_criterion(model, X, loc, gamma)
    best = rows[int(np.argmax(rows[:, d]))]
    return rows, best


# ---------------------------------------------------------------------------
# I/O


def ingest_csv(path, expected_d=None):
    """Parse a numeric CSV (optional single header line) into a Sample."""
    rows = []
    d = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, cells in enumerate(reader, start=1):
            cells = [c.strip() for c in cells if c.strip() != ""]
            if not cells:
                continue
            try:
                vals = [float(c) for c in cells]
            except ValueError:
                if lineno == 1:
                    continue  # header
                raise IngestionError(f"{path}: non-numeric cell on line {lineno}")
            if any(not np.isfinite(v) for v in vals):
                raise IngestionError(f"{path}: non-finite value on line {lineno}")
            if d is None:
                d = len(vals)
            elif len(vals) != d:
                raise IngestionError(
                    f"{path}: line {lineno} has {len(vals)} columns, expected {d}"
                )
            rows.append(vals)
    if not rows:
        raise IngestionError(f"{path}: no numeric rows")
    if expected_d is not None and d != expected_d:
        raise IngestionError(f"{path}: found {d} columns, expected {expected_d}")
    return Sample(data=np.asarray(rows))


def benchmark_csv(rows, include_time=False):
    """Render benchmark rows as a CSV string.

    Timings are opt-in: the default output depends only on the spec and the
    master seed, so repeated runs are byte-identical.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["problem", "method", "param_name", "param_value", "rejection_rate", "trials"]
    if include_time:
        header.insert(5, "mean_wall_time")
    writer.writerow(header)
    for r in rows:
        fields = [
            r.problem,
            r.method,
            r.param_name,
            repr(r.param_value),
            repr(r.rejection_rate),
            r.trials,
        ]
        if include_time:
            fields.insert(5, f"{r.mean_wall_time:.6f}")
        writer.writerow(fields)
    return buf.getvalue()
