"""Sparse signal recovery under general i.i.d. measurement-noise priors.

The solver passes Gaussian messages between scalar denoisers (for the
signal and for the noise) and a joint linear estimator tied to the
measurement constraint. A Monte-Carlo harness benchmarks it against a
standard AWGN-based baseline over SNR grids.
"""

__version__ = "0.1.0"

from .denoisers import (
    ALPHA_FLOOR,
    BinaryNoise,
    DenoiseResult,
    GaussianNoise,
    LaplaceNoise,
    NoisePrior,
    SignalPrior,
    denoise_bg,
    denoise_binary,
    denoise_gaussian,
    denoise_laplace,
    denoise_vector,
    quadrature_oracle,
)
from .engine import (
    EngineConfig,
    IterationRecord,
    RunResult,
    run_gnp_vamp,
    run_standard_vamp,
)
from .errors import (
    DegenerateConfigError,
    DivergenceError,
    OracleFailure,
    RankDeficiencyError,
)
from .harness import (
    ALGORITHMS,
    AggregateRow,
    GeneratedInstance,
    SweepConfig,
    SweepRecord,
    aggregate_records,
    config_from_dict,
    config_to_dict,
    emit_outputs,
    gen_instance,
    matched_variance,
    nrmse,
    run_sweep,
    trial_seed,
)
from .lmmse import (
    LmmseOutput,
    OperatorCache,
    ProblemInstance,
    alpha_w,
    alpha_x,
    build_cache,
    joint_oracle,
    lmmse_joint,
    lmmse_w,
    lmmse_x,
)
from .messages import (
    DEFAULT_BOUNDS,
    GaussianMessage,
    PrecisionBounds,
    clamp_precision,
    ext_combine,
)

__all__ = [
    "ALGORITHMS",
    "ALPHA_FLOOR",
    "AggregateRow",
    "BinaryNoise",
    "DEFAULT_BOUNDS",
    "DegenerateConfigError",
    "DenoiseResult",
    "DivergenceError",
    "EngineConfig",
    "GaussianMessage",
    "GaussianNoise",
    "GeneratedInstance",
    "IterationRecord",
    "LaplaceNoise",
    "LmmseOutput",
    "NoisePrior",
    "OperatorCache",
    "OracleFailure",
    "PrecisionBounds",
    "ProblemInstance",
    "RankDeficiencyError",
    "RunResult",
    "SignalPrior",
    "SweepConfig",
    "SweepRecord",
    "aggregate_records",
    "alpha_w",
    "alpha_x",
    "build_cache",
    "clamp_precision",
    "config_from_dict",
    "config_to_dict",
    "denoise_bg",
    "denoise_binary",
    "denoise_gaussian",
    "denoise_laplace",
    "denoise_vector",
    "emit_outputs",
    "ext_combine",
    "gen_instance",
    "joint_oracle",
    "lmmse_joint",
    "lmmse_w",
    "lmmse_x",
    "matched_variance",
    "nrmse",
    "quadrature_oracle",
    "run_gnp_vamp",
    "run_standard_vamp",
    "run_sweep",
    "trial_seed",
    "__version__",
]
