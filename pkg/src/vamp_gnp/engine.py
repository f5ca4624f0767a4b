"""Message-passing solvers for y = A x + w with separable priors on x and w.

Two entry points share the same linear block and stopping logic:

* `run_gnp_vamp` carries Gaussian beliefs for the signal *and* the noise.
  Each iteration denoises both under their priors, converts the posteriors
  to extrinsic messages, and refreshes both through the joint linear
  estimator.
* `run_standard_vamp` is the AWGN baseline: the noise belief is pinned to a
  zero-mean Gaussian of fixed variance and only the signal message loops.

All exchanged precisions are clamped into `PrecisionBounds`; posterior
precisions are clamped before the extrinsic subtraction so a saturated
denoiser (averaged derivative at its floor) cannot blow up the extrinsic
mean. Runs are pure functions of their inputs: no randomness, identical
results on identical calls.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .denoisers import NoisePrior, SignalPrior, denoise_vector
from .errors import DivergenceError
from .lmmse import OperatorCache, ProblemInstance, build_cache, lmmse_joint
from .messages import DEFAULT_BOUNDS, GaussianMessage, PrecisionBounds, clamp_precision, ext_combine


@dataclass(frozen=True)
class EngineConfig:
    max_iters: int = 100
    tol: float = 1e-8
    damping: float = 1.0
    init_mean_x: np.ndarray | None = None
    init_precision_x: float = 1e-6
    init_mean_w: np.ndarray | None = None
    init_precision_w: float = 1e-6
    bounds: PrecisionBounds = field(default_factory=PrecisionBounds)

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.tol < 0.0:
            raise ValueError(f"tol must be >= 0, got {self.tol}")
        if not (0.0 < self.damping <= 1.0):
            raise ValueError(f"damping must lie in (0, 1], got {self.damping}")
        for name in ("init_precision_x", "init_precision_w"):
            val = getattr(self, name)
            if not (val > 0.0 and np.isfinite(val)):
                raise ValueError(f"{name} must be positive and finite, got {val}")


@dataclass(frozen=True)
class IterationRecord:
    """Message precisions and diagnostics for one completed iteration.

    `*_den` precisions enter the denoisers, `*_lin` precisions enter the
    linear block. `nrmse` is measurement-domain and only present when the
    instance carries ground truth. `residual_rel` is
    ||y - A x_lin - w_lin|| / ||y|| for the linear-block posterior means.
    """

    gamma_x_den: float
    gamma_x_lin: float
    gamma_w_den: float
    gamma_w_lin: float
    nrmse: float | None
    residual_rel: float


@dataclass(frozen=True)
class RunResult:
    x_hat: np.ndarray
    w_hat: np.ndarray
    iterations_used: int
    converged: bool
    trace: tuple[IterationRecord, ...]


def _init_message(mean, size, precision, bounds, label):
    if mean is None:
        mean = np.zeros(size)
    else:
        mean = np.asarray(mean, dtype=float)
        if mean.shape != (size,):
            raise ValueError(f"{label} initial mean must have shape ({size},), got {mean.shape}")
    return GaussianMessage(mean, clamp_precision(precision, bounds))


def _damped(new: GaussianMessage, prev: GaussianMessage | None, damping: float) -> GaussianMessage:
    if damping >= 1.0 or prev is None:
        return new
    gamma = new.precision ** damping * prev.precision ** (1.0 - damping)
    mean = damping * new.mean + (1.0 - damping) * prev.mean
    return GaussianMessage(mean, gamma)


def _to_extrinsic(mean, precision, incoming, bounds, iteration, trace):
    """Convert a block posterior into its extrinsic message.

    The posterior precision is first pulled to `incoming + clamp(difference)`
    so the subtraction inside ext_combine always lands inside the bounds:
    the extrinsic mean is then an undistorted precision-weighted difference
    even when a saturated denoiser reports an astronomical posterior
    precision.
    """
    if not np.all(np.isfinite(mean)):
        raise DivergenceError(iteration, tuple(trace), "non-finite posterior mean")
    capped = incoming.precision + clamp_precision(precision - incoming.precision, bounds)
    return ext_combine(GaussianMessage(mean, capped), incoming, bounds)


def _rel_change(new, old):
    return float(np.linalg.norm(new - old) / max(np.linalg.norm(old), 1e-12))


class _Scorer:
    """Measurement-domain error against ground truth, when it exists."""

    def __init__(self, instance: ProblemInstance):
        if instance.true_x is not None:
            self._ax = instance.A @ instance.true_x
            self._scale = np.linalg.norm(self._ax)
        else:
            self._ax = None

    def __call__(self, A, x_hat):
        if self._ax is None or self._scale == 0.0:
            return None
        return float(np.linalg.norm(self._ax - A @ x_hat) / self._scale)


def run_gnp_vamp(
    instance: ProblemInstance,
    signal_prior: SignalPrior,
    noise_prior: NoisePrior,
    config: EngineConfig = EngineConfig(),
    cache: OperatorCache | None = None,
) -> RunResult:
    """Recover x (and w) with denoising on both the signal and the noise.

    Per iteration: denoise the signal belief, form its extrinsic message;
    denoise the noise belief, form its extrinsic message; run the joint
    linear estimator under the measurement constraint; convert both linear
    posteriors back to extrinsic messages for the next round. Stops early
    once the signal posterior mean moves less than `tol` in relative norm.

    Raises DivergenceError as soon as any message mean turns non-finite,
    carrying the trace accumulated so far.
    """
    if cache is None:
        cache = build_cache(instance.A)
    A, y = instance.A, instance.y
    m, n = cache.shape
    bounds = config.bounds
    score = _Scorer(instance)
    y_norm = max(np.linalg.norm(y), 1e-12)

    x_den = _init_message(config.init_mean_x, n, config.init_precision_x, bounds, "x")
    w_den = _init_message(config.init_mean_w, m, config.init_precision_w, bounds, "w")
    x_lin_prev = None
    w_lin_prev = None
    x_hat_prev = None

    trace: list[IterationRecord] = []
    x_hat = x_den.mean
    w_hat = w_den.mean
    converged = False
    iterations = 0

    for t in range(config.max_iters):
        try:
            den_x = denoise_vector(signal_prior, x_den.mean, x_den.precision)
            x_lin = _damped(
                _to_extrinsic(den_x.posterior_mean, den_x.posterior_precision,
                              x_den, bounds, t, trace),
                x_lin_prev, config.damping)

            den_w = denoise_vector(noise_prior, w_den.mean, w_den.precision)
            w_lin = _damped(
                _to_extrinsic(den_w.posterior_mean, den_w.posterior_precision,
                              w_den, bounds, t, trace),
                w_lin_prev, config.damping)

            lin = lmmse_joint(cache, y, x_lin, w_lin)
            x_den_next = _damped(
                _to_extrinsic(lin.x_mean, lin.x_precision, x_lin, bounds, t, trace),
                x_den, config.damping)
            w_den_next = _damped(
                _to_extrinsic(lin.w_mean, lin.w_precision, w_lin, bounds, t, trace),
                w_den, config.damping)
        except ValueError as exc:
            raise DivergenceError(t, tuple(trace), str(exc)) from exc

        residual = float(np.linalg.norm(y - A @ lin.x_mean - lin.w_mean) / y_norm)
        trace.append(IterationRecord(
            gamma_x_den=x_den.precision,
            gamma_x_lin=x_lin.precision,
            gamma_w_den=w_den.precision,
            gamma_w_lin=w_lin.precision,
            nrmse=score(A, den_x.posterior_mean),
            residual_rel=residual,
        ))

        x_hat = den_x.posterior_mean
        w_hat = den_w.posterior_mean
        iterations = t + 1
        if x_hat_prev is not None and _rel_change(x_hat, x_hat_prev) < config.tol:
            converged = True
            break
        x_hat_prev = x_hat
        x_den, w_den = x_den_next, w_den_next
        x_lin_prev, w_lin_prev = x_lin, w_lin

    return RunResult(x_hat, w_hat, iterations, converged, tuple(trace))


def run_standard_vamp(
    instance: ProblemInstance,
    signal_prior: SignalPrior,
    noise_variance: float,
    config: EngineConfig = EngineConfig(),
    cache: OperatorCache | None = None,
) -> RunResult:
    """AWGN baseline: same loop with the noise belief pinned.

    The noise message entering the linear block is fixed at mean zero and
    precision 1/noise_variance; there is no noise denoiser. Everything else
    (signal denoising, extrinsic updates, stopping rule) matches
    `run_gnp_vamp`, so differences in output isolate the noise model.
    """
    if not (noise_variance > 0.0 and np.isfinite(noise_variance)):
        raise ValueError(f"noise_variance must be positive and finite, got {noise_variance}")
    if cache is None:
        cache = build_cache(instance.A)
    A, y = instance.A, instance.y
    m, n = cache.shape
    bounds = config.bounds
    score = _Scorer(instance)
    y_norm = max(np.linalg.norm(y), 1e-12)

    gamma_w = clamp_precision(1.0 / noise_variance, bounds)
    w_lin = GaussianMessage(np.zeros(m), gamma_w)

    x_den = _init_message(config.init_mean_x, n, config.init_precision_x, bounds, "x")
    x_lin_prev = None
    x_hat_prev = None

    trace: list[IterationRecord] = []
    x_hat = x_den.mean
    w_hat = np.zeros(m)
    converged = False
    iterations = 0

    for t in range(config.max_iters):
        try:
            den_x = denoise_vector(signal_prior, x_den.mean, x_den.precision)
            x_lin = _damped(
                _to_extrinsic(den_x.posterior_mean, den_x.posterior_precision,
                              x_den, bounds, t, trace),
                x_lin_prev, config.damping)

            lin = lmmse_joint(cache, y, x_lin, w_lin)
            x_den_next = _damped(
                _to_extrinsic(lin.x_mean, lin.x_precision, x_lin, bounds, t, trace),
                x_den, config.damping)
        except ValueError as exc:
            raise DivergenceError(t, tuple(trace), str(exc)) from exc

        residual = float(np.linalg.norm(y - A @ lin.x_mean - lin.w_mean) / y_norm)
        trace.append(IterationRecord(
            gamma_x_den=x_den.precision,
            gamma_x_lin=x_lin.precision,
            gamma_w_den=gamma_w,
            gamma_w_lin=gamma_w,
            nrmse=score(A, den_x.posterior_mean),
            residual_rel=residual,
        ))

        x_hat = den_x.posterior_mean
        w_hat = lin.w_mean
        iterations = t + 1
        if x_hat_prev is not None and _rel_change(x_hat, x_hat_prev) < config.tol:
            converged = True
            break
        x_hat_prev = x_hat
        x_den = x_den_next
        x_lin_prev = x_lin

    return RunResult(x_hat, w_hat, iterations, converged, tuple(trace))
