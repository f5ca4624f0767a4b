"""Gaussian message records and extrinsic-information updates.

Every block of the solver exchanges beliefs of the form N(mean, gamma^-1 I):
a mean vector paired with a single scalar precision. The extrinsic update
divides the incoming message out of a posterior belief so that no block is
fed its own output back as fresh evidence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PrecisionBounds:
    """Clamp window keeping message precisions positive and finite."""

    gamma_min: float = 1e-11
    gamma_max: float = 1e11

    def __post_init__(self):
        if not (0.0 < self.gamma_min < self.gamma_max < float("inf")):
            raise ValueError(
                f"precision bounds must satisfy 0 < gamma_min < gamma_max, "
                f"got ({self.gamma_min}, {self.gamma_max})"
            )


DEFAULT_BOUNDS = PrecisionBounds()


@dataclass(frozen=True)
class GaussianMessage:
    """Isotropic Gaussian belief: a mean vector plus one scalar precision."""

    mean: np.ndarray
    precision: float

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "precision", float(self.precision))
        if not np.all(np.isfinite(mean)):
            raise ValueError("message mean must have finite entries")
        if not (np.isfinite(self.precision) and self.precision > 0.0):
            raise ValueError(f"message precision must be positive and finite, got {self.precision}")

    def __len__(self):
        return self.mean.shape[0]


def clamp_precision(gamma: float, bounds: PrecisionBounds = DEFAULT_BOUNDS) -> float:
    """Clip a raw precision into the configured positive window."""
    return min(max(float(gamma), bounds.gamma_min), bounds.gamma_max)


def ext_combine(
    posterior: GaussianMessage,
    incoming: GaussianMessage,
    bounds: PrecisionBounds = DEFAULT_BOUNDS,
) -> GaussianMessage:
    """Extrinsic belief: the posterior with the incoming message divided out.

    The output precision is the difference of the two input precisions,
    clamped into `bounds`. The output mean is the precision-weighted
    difference of the means, normalized by the clamped output precision so
    that the returned (mean, precision) pair stays internally consistent:
    gamma_ext * mean_ext always equals the raw weighted difference.
    """
    if posterior.mean.shape != incoming.mean.shape:
        raise ValueError(
            f"message shapes differ: {posterior.mean.shape} vs {incoming.mean.shape}"
        )
    gamma_ext = clamp_precision(posterior.precision - incoming.precision, bounds)
    mean_ext = (posterior.precision * posterior.mean - incoming.precision * incoming.mean) / gamma_ext
    return GaussianMessage(mean_ext, gamma_ext)
