"""Linear-time Stein goodness-of-fit testing with learned test locations."""

from .bahadur import (
    SlopeConfig,
    efficiency_bound,
    efficiency_gauss,
    fssd_slope_gauss,
    ksd_population_gauss,
    lks_slope_gauss,
    slope_generic_mc,
)
from .exceptions import (
    ConfigError,
    DegenerateSampleError,
    IngestionError,
    InvalidModelError,
    SampleSizeError,
    SteinGofError,
    UndefinedEfficiencyError,
)
from .harness import (
    BenchmarkRow,
    RunSpec,
    benchmark_csv,
    ingest_csv,
    run_benchmark,
    run_power_vs_j,
    run_runtime_scaling,
    run_surface_scan,
)
from .kernel import GaussKernel, median_heuristic
from .models import (
    GmmParams,
    RbmParams,
    Sample,
    ScoredModel,
    fit_gmm_em,
    gaussian_model,
    gaussian_score,
    gmm_model,
    gmm_score,
    model_from_config,
    rbm_model,
    rbm_score,
    sample_rbm_gibbs,
    sample_standard,
)
from .optimize import (
    OptimizerConfig,
    approx_power,
    optimize_locations,
    power_criterion,
    power_criterion_grad,
    split,
)
from .stein import (
    SteinFeatures,
    TestLocations,
    feature_matrix,
    fssd2_ustat,
    hp,
    hp_gram,
    ksd2_ustat,
    lks2_stat,
    moments,
    sigma_h1_hat,
    tau,
    xi,
)
from .testing import (
    NullSpec,
    TestResult,
    fssd_test,
    ksd_test,
    lks_test,
    null_eigs,
    simulate_null,
    threshold,
)

__version__ = "0.1.0"
