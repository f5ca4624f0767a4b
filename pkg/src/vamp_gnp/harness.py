"""Monte-Carlo benchmark harness: paired SNR sweeps over random instances.

Each (SNR point, trial) pair gets its own deterministic seed derived from
the base seed by integer mixing, generates one random instance, and scores
every configured algorithm on that same instance so comparisons are paired.
Trials are independent, may run on a thread pool (`VAMP_GNP_THREADS`, 0 or
unset = auto), and the emitted tables are byte-identical regardless of how
the work was scheduled.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .denoisers import BinaryNoise, GaussianNoise, LaplaceNoise, NoisePrior, SignalPrior
from .engine import EngineConfig, run_gnp_vamp, run_standard_vamp
from .errors import DegenerateConfigError, DivergenceError
from .lmmse import ProblemInstance, build_cache
from .messages import PrecisionBounds

ALGORITHMS = ("gnp", "standard")
THREADS_ENV_VAR = "VAMP_GNP_THREADS"
_RESAMPLE_BUDGET = 64

TRIAL_CSV_HEADER = "snr_db,algorithm,noise_model,trial,seed,nrmse,iterations,converged"
AGGREGATE_CSV_HEADER = "snr_db,algorithm,mean_nrmse,stderr_nrmse,n_trials"


@dataclass(frozen=True)
class SweepConfig:
    m: int = 250
    n: int = 500
    rho: float = 0.95
    snr_grid_db: tuple[float, ...] = (0.0, 5.0, 10.0, 15.0, 20.0)
    trials: int = 100
    noise_model: NoisePrior = field(default_factory=lambda: GaussianNoise(1.0))
    algorithms: tuple[str, ...] = ALGORITHMS
    base_seed: int = 42
    engine: EngineConfig = field(default_factory=EngineConfig)

    def __post_init__(self):
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        if not (0 < self.m < self.n):
            raise ValueError(f"need 0 < M < N, got M={self.m}, N={self.n}")
        if not (0.0 <= self.rho <= 1.0):
            raise ValueError(f"rho must lie in [0, 1], got {self.rho}")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if not self.snr_grid_db:
            raise ValueError("snr_grid_db must not be empty")
        if not self.algorithms:
            raise ValueError("algorithms must not be empty")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {a!r}, expected one of {ALGORITHMS}")


@dataclass(frozen=True)
class SweepRecord:
    """Result of one algorithm on one generated instance.

    `nrmse` is NaN if and only if `diverged` is set. `resamples` counts
    rejected all-zero signal draws; `max_residual_rel` is the worst
    measurement-identity residual seen across the run's iterations.
    """

    snr_db: float
    algorithm: str
    noise_model: str
    trial: int
    seed: int
    nrmse: float
    iterations: int
    converged: bool
    diverged: bool = False
    resamples: int = 0
    max_residual_rel: float = 0.0


@dataclass(frozen=True)
class AggregateRow:
    snr_db: float
    algorithm: str
    mean_nrmse: float
    stderr_nrmse: float
    n_trials: int


@dataclass(frozen=True)
class GeneratedInstance:
    instance: ProblemInstance
    noise_prior: NoisePrior
    resamples: int


# -- deterministic seed derivation ------------------------------------------

_MASK64 = (1 << 64) - 1


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def trial_seed(base_seed: int, snr_index: int, trial: int) -> int:
    """Mix (base, SNR index, trial) into one well-spread 64-bit seed."""
    z = _splitmix64(base_seed & _MASK64)
    z = _splitmix64(z ^ (snr_index & _MASK64))
    return _splitmix64(z ^ (trial & _MASK64))


# -- instance generation ------------------------------------------------------

def _draw_noise(rng, model: NoisePrior, m: int) -> np.ndarray:
    if isinstance(model, GaussianNoise):
        return rng.standard_normal(m) * math.sqrt(model.variance)
    if isinstance(model, LaplaceNoise):
        return rng.laplace(model.mu, model.b, m)
    if isinstance(model, BinaryNoise):
        return model.s * np.where(rng.random(m) < 0.5, 1.0, -1.0)
    raise TypeError(f"unknown noise model {type(model).__name__!r}")


def _scale_noise(model: NoisePrior, kappa: float) -> NoisePrior:
    if isinstance(model, GaussianNoise):
        return GaussianNoise(model.variance * kappa * kappa)
    if isinstance(model, LaplaceNoise):
        return LaplaceNoise(model.mu * kappa, model.b * kappa)
    return BinaryNoise(model.s * kappa)


def matched_variance(model: NoisePrior) -> float:
    """Variance of the noise draw, for the AWGN baseline's pinned precision."""
    if isinstance(model, GaussianNoise):
        return model.variance
    if isinstance(model, LaplaceNoise):
        return 2.0 * model.b * model.b
    if isinstance(model, BinaryNoise):
        return model.s * model.s
    raise TypeError(f"unknown noise model {type(model).__name__!r}")


def gen_instance(seed: int, config: SweepConfig, snr_db: float) -> GeneratedInstance:
    """Draw (A, x, w), then rescale the noise so the SNR is met exactly.

    The signal is resampled (bounded budget) if it comes out all-zero, since
    the SNR would be undefined. The noise keeps its distributional shape
    under the rescaling; the returned prior carries the realized parameters.
    """
    rng = np.random.default_rng(seed)
    m, n = config.m, config.n
    A = rng.standard_normal((m, n))

    x = None
    resamples = 0
    for attempt in range(_RESAMPLE_BUDGET):
        active = rng.random(n) < (1.0 - config.rho)
        values = rng.standard_normal(n)
        if np.any(active):
            x = np.where(active, values, 0.0)
            resamples = attempt
            break
    if x is None:
        raise DegenerateConfigError(
            f"no nonzero signal draw in {_RESAMPLE_BUDGET} attempts (rho={config.rho})"
        )

    w_nominal = _draw_noise(rng, config.noise_model, m)
    w_norm = np.linalg.norm(w_nominal)
    if w_norm == 0.0:
        raise DegenerateConfigError("nominal noise draw has zero norm")

    ax = A @ x
    kappa = float(np.linalg.norm(ax) / (10.0 ** (snr_db / 20.0) * w_norm))
    w = kappa * w_nominal
    instance = ProblemInstance(A=A, y=ax + w, true_x=x, true_w=w)
    return GeneratedInstance(instance, _scale_noise(config.noise_model, kappa), resamples)


def nrmse(x_hat: np.ndarray, instance: ProblemInstance) -> float:
    """Measurement-domain error ||A (x - x_hat)|| / ||A x||."""
    if instance.true_x is None:
        raise ValueError("nrmse requires an instance with ground truth")
    ref = instance.A @ instance.true_x
    scale = np.linalg.norm(ref)
    if scale == 0.0:
        raise ValueError("ground-truth signal has zero measurement norm")
    return float(np.linalg.norm(ref - instance.A @ np.asarray(x_hat, dtype=float)) / scale)


# -- sweep execution ----------------------------------------------------------

def _worker_count(n_tasks: int) -> int:
    raw = os.environ.get(THREADS_ENV_VAR, "0")
    try:
        requested = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}")
    if requested < 0:
        raise ValueError(f"{THREADS_ENV_VAR} must be >= 0, got {requested}")
    if requested == 0:
        requested = os.cpu_count() or 1
    return max(1, min(requested, n_tasks))


def _run_trial(config: SweepConfig, snr_index: int, snr_db: float, trial: int) -> list[SweepRecord]:
    seed = trial_seed(config.base_seed, snr_index, trial)
    gen = gen_instance(seed, config, snr_db)
    cache = build_cache(gen.instance.A)
    signal_prior = SignalPrior(config.rho)
    rows = []
    for algorithm in config.algorithms:
        try:
            if algorithm == "gnp":
                result = run_gnp_vamp(gen.instance, signal_prior, gen.noise_prior,
                                      config.engine, cache=cache)
            else:
                result = run_standard_vamp(gen.instance, signal_prior,
                                           matched_variance(gen.noise_prior),
                                           config.engine, cache=cache)
            rows.append(SweepRecord(
                snr_db=snr_db,
                algorithm=algorithm,
                noise_model=config.noise_model.kind,
                trial=trial,
                seed=seed,
                nrmse=nrmse(result.x_hat, gen.instance),
                iterations=result.iterations_used,
                converged=result.converged,
                resamples=gen.resamples,
                max_residual_rel=max(rec.residual_rel for rec in result.trace),
            ))
        except DivergenceError as exc:
            rows.append(SweepRecord(
                snr_db=snr_db,
                algorithm=algorithm,
                noise_model=config.noise_model.kind,
                trial=trial,
                seed=seed,
                nrmse=float("nan"),
                iterations=exc.iteration,
                converged=False,
                diverged=True,
                resamples=gen.resamples,
                max_residual_rel=float("nan"),
            ))
    return rows


def aggregate_records(records: list[SweepRecord]) -> list[AggregateRow]:
    """Mean and standard error of finite NRMSE values per (SNR, algorithm)."""
    groups: dict[tuple[float, str], list[float]] = {}
    for rec in records:
        if math.isfinite(rec.nrmse):
            groups.setdefault((rec.snr_db, rec.algorithm), []).append(rec.nrmse)
    rows = []
    for (snr_db, algorithm), vals in sorted(groups.items()):
        n = len(vals)
        mean = float(np.mean(vals))
        stderr = float(np.std(vals, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        rows.append(AggregateRow(snr_db, algorithm, mean, stderr, n))
    return rows


def run_sweep(config: SweepConfig) -> tuple[list[SweepRecord], list[AggregateRow]]:
    """Run every (SNR, trial) pair for every algorithm; outputs are sorted.

    Record content depends only on the configuration, never on the worker
    count: each trial is seeded independently and computed in one task.
    """
    tasks = [
        (snr_index, snr_db, trial)
        for snr_index, snr_db in enumerate(config.snr_grid_db)
        for trial in range(config.trials)
    ]
    workers = _worker_count(len(tasks))
    if workers == 1:
        batches = [_run_trial(config, *task) for task in tasks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(lambda task: _run_trial(config, *task), tasks))
    records = [row for batch in batches for row in batch]
    records.sort(key=lambda r: (r.snr_db, r.algorithm, r.trial))
    return records, aggregate_records(records)


# -- serialization ------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _noise_to_dict(model: NoisePrior) -> dict:
    if isinstance(model, GaussianNoise):
        return {"kind": "gaussian", "variance": model.variance}
    if isinstance(model, LaplaceNoise):
        return {"kind": "laplace", "mu": model.mu, "b": model.b}
    if isinstance(model, BinaryNoise):
        return {"kind": "binary", "s": model.s}
    raise TypeError(f"unknown noise model {type(model).__name__!r}")


def noise_from_dict(payload: dict) -> NoisePrior:
    kind = payload.get("kind")
    if kind == "gaussian":
        return GaussianNoise(payload["variance"])
    if kind == "laplace":
        return LaplaceNoise(payload["mu"], payload["b"])
    if kind == "binary":
        return BinaryNoise(payload["s"])
    raise ValueError(f"unknown noise model kind {kind!r}")


def config_to_dict(config: SweepConfig) -> dict:
    return {
        "m": config.m,
        "n": config.n,
        "rho": config.rho,
        "snr_grid_db": list(config.snr_grid_db),
        "trials": config.trials,
        "noise_model": _noise_to_dict(config.noise_model),
        "algorithms": list(config.algorithms),
        "base_seed": config.base_seed,
        "engine": {
            "max_iters": config.engine.max_iters,
            "tol": config.engine.tol,
            "damping": config.engine.damping,
            "init_precision_x": config.engine.init_precision_x,
            "init_precision_w": config.engine.init_precision_w,
            "gamma_min": config.engine.bounds.gamma_min,
            "gamma_max": config.engine.bounds.gamma_max,
        },
    }


def config_from_dict(payload: dict) -> SweepConfig:
    eng = payload["engine"]
    return SweepConfig(
        m=payload["m"],
        n=payload["n"],
        rho=payload["rho"],
        snr_grid_db=tuple(payload["snr_grid_db"]),
        trials=payload["trials"],
        noise_model=noise_from_dict(payload["noise_model"]),
        algorithms=tuple(payload["algorithms"]),
        base_seed=payload["base_seed"],
        engine=EngineConfig(
            max_iters=eng["max_iters"],
            tol=eng["tol"],
            damping=eng["damping"],
            init_precision_x=eng["init_precision_x"],
            init_precision_w=eng["init_precision_w"],
            bounds=PrecisionBounds(eng["gamma_min"], eng["gamma_max"]),
        ),
    )


def emit_outputs(
    records: list[SweepRecord],
    aggregates: list[AggregateRow],
    out_dir,
    config: SweepConfig,
    emit_plot: bool = False,
) -> dict[str, Path]:
    """Write the per-trial table, the aggregate table, and the run manifest.

    With `emit_plot`, additionally renders the mean-NRMSE-versus-SNR figure
    next to the tables. Returns the paths written, keyed by artifact name.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}

    trials_path = out / "trials.csv"
    lines = [TRIAL_CSV_HEADER]
    for r in records:
        lines.append(",".join([
            _fmt(r.snr_db), r.algorithm, r.noise_model, str(r.trial), str(r.seed),
            _fmt(r.nrmse), str(r.iterations), "true" if r.converged else "false",
        ]))
    trials_path.write_text("\n".join(lines) + "\n")
    paths["trials"] = trials_path

    agg_path = out / "aggregate.csv"
    lines = [AGGREGATE_CSV_HEADER]
    for a in aggregates:
        lines.append(",".join([
            _fmt(a.snr_db), a.algorithm, _fmt(a.mean_nrmse), _fmt(a.stderr_nrmse),
            str(a.n_trials),
        ]))
    agg_path.write_text("\n".join(lines) + "\n")
    paths["aggregate"] = agg_path

    manifest_path = out / "manifest.json"
    manifest = {"version": __version__, "config": config_to_dict(config)}
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    paths["manifest"] = manifest_path

    if emit_plot:
        from .report import render_nrmse_figure

        paths["figure"] = render_nrmse_figure(
            aggregates, out / "nrmse_vs_snr.png", noise_model=config.noise_model.kind
        )
    return paths
