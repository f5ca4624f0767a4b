"""Joint linear-Gaussian estimation of the signal and the additive noise.

Given extrinsic beliefs x ~ N(x_ext, 1/gamma_x I) and w ~ N(w_ext,
1/gamma_w I) tied together by the exact constraint y = A x + w, the joint
belief is a Gaussian supported on that affine set. This module computes its
marginal means, the averaged posterior variances (normalized Jacobian
traces), and the implied posterior precisions. A one-time SVD of A turns
every solve into diagonal scaling in the singular bases, so each call costs
O(M N) after the factorization.

`joint_oracle` is the reference path: it conditions the dense stacked
Gaussian [x; w] on y directly and shares no algebra with the fast path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OracleFailure, RankDeficiencyError
from .messages import GaussianMessage

_RANK_RTOL = 1e-10


@dataclass(frozen=True)
class ProblemInstance:
    """One recovery problem: y = A x + w with optional ground truth."""

    A: np.ndarray
    y: np.ndarray
    true_x: np.ndarray | None = None
    true_w: np.ndarray | None = None

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        y = np.asarray(self.y, dtype=float)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "y", y)
        if A.ndim != 2:
            raise ValueError(f"A must be a matrix, got ndim={A.ndim}")
        m, n = A.shape
        if m >= n:
            raise ValueError(f"expected a wide matrix (M < N), got shape {A.shape}")
        if not np.all(np.isfinite(A)):
            raise ValueError("A must have finite entries")
        if y.shape != (m,):
            raise ValueError(f"y must have shape ({m},), got {y.shape}")
        if not np.all(np.isfinite(y)):
            raise ValueError("y must have finite entries")
        for name, vec, size in (("true_x", self.true_x, n), ("true_w", self.true_w, m)):
            if vec is not None:
                vec = np.asarray(vec, dtype=float)
                object.__setattr__(self, name, vec)
                if vec.shape != (size,):
                    raise ValueError(f"{name} must have shape ({size},), got {vec.shape}")
        if self.true_x is not None and self.true_w is not None:
            gap = np.linalg.norm(y - A @ self.true_x - self.true_w)
            if gap > 1e-12 * max(np.linalg.norm(y), 1.0):
                raise ValueError("ground truth does not satisfy y = A x + w")

    @property
    def shape(self):
        return self.A.shape


@dataclass(frozen=True)
class OperatorCache:
    """SVD factors of the measurement matrix, reused across iterations.

    u: (M, M) left singular vectors; s: (M,) singular values, all positive;
    vt: (M, N) top right-singular directions. Rows of A reconstruct as
    u @ diag(s) @ vt.
    """

    u: np.ndarray
    s: np.ndarray
    vt: np.ndarray

    @property
    def shape(self):
        return self.vt.shape


def build_cache(A: np.ndarray) -> OperatorCache:
    """Factorize A once; raises RankDeficiencyError if a row direction is lost."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError(f"A must be a matrix, got ndim={A.ndim}")
    if not np.all(np.isfinite(A)):
        raise ValueError("A must have finite entries")
    m, n = A.shape
    if m > n:
        raise ValueError(f"expected M <= N, got shape {A.shape}")
    u, s, vt = np.linalg.svd(A, full_matrices=False)
    if s[-1] <= _RANK_RTOL * s[0]:
        raise RankDeficiencyError(
            f"smallest singular value {s[-1]:.3e} below rank tolerance "
            f"({_RANK_RTOL:.0e} * {s[0]:.3e})"
        )
    return OperatorCache(u, s, vt)


@dataclass(frozen=True)
class LmmseOutput:
    x_mean: np.ndarray
    w_mean: np.ndarray
    alpha_x: float
    alpha_w: float
    x_precision: float
    w_precision: float


def _check_inputs(cache, y, x_ext, w_ext):
    m, n = cache.shape
    if y.shape != (m,):
        raise ValueError(f"y must have shape ({m},), got {y.shape}")
    if x_ext.mean.shape != (n,):
        raise ValueError(f"x belief must have length {n}, got {x_ext.mean.shape}")
    if w_ext.mean.shape != (m,):
        raise ValueError(f"w belief must have length {m}, got {w_ext.mean.shape}")


def _rotated_residual(cache, y, x_ext, w_ext):
    """(y - A x_ext - w_ext) expressed in the left singular basis."""
    return cache.u.T @ (y - w_ext.mean) - cache.s * (cache.vt @ x_ext.mean)


def lmmse_x(cache: OperatorCache, y: np.ndarray, x_ext: GaussianMessage,
            w_ext: GaussianMessage) -> np.ndarray:
    """Signal posterior mean (gx I + gw A^T A)^-1 (gx x_ext + gw A^T (y - w_ext)).

    The inverse acts as 1/(gx + gw s_i^2) on the top-M right-singular
    directions and as 1/gx on their orthogonal complement. Evaluated as the
    extrinsic mean plus a singular-space correction with bounded
    coefficients, so extreme gx/gw ratios cannot cancel catastrophically.
    """
    _check_inputs(cache, y, x_ext, w_ext)
    gx, gw = x_ext.precision, w_ext.precision
    s2 = cache.s * cache.s
    d = _rotated_residual(cache, y, x_ext, w_ext)
    return x_ext.mean + cache.vt.T @ (gw * cache.s / (gx + gw * s2) * d)


def lmmse_w(cache: OperatorCache, y: np.ndarray, x_ext: GaussianMessage,
            w_ext: GaussianMessage) -> np.ndarray:
    """Noise posterior mean (gw I + gx Q)^-1 (gw w_ext + gx Q (y - A x_ext)).

    Q = (A A^T)^-1 acts as 1/s_i^2 in the left singular basis. Written as
    the extrinsic mean plus its share of the rotated measurement residual:
    the x and w corrections split each residual component exactly, so
    y = A x_mean + w_mean holds to rounding error by construction.
    """
    _check_inputs(cache, y, x_ext, w_ext)
    gx, gw = x_ext.precision, w_ext.precision
    s2 = cache.s * cache.s
    d = _rotated_residual(cache, y, x_ext, w_ext)
    return w_ext.mean + cache.u @ (gx / (gx + gw * s2) * d)


def alpha_x(cache: OperatorCache, gamma_x: float, gamma_w: float) -> float:
    """Normalized trace of the signal-side posterior Jacobian."""
    m, n = cache.shape
    s2 = cache.s * cache.s
    return float((gamma_x / n) * (np.sum(1.0 / (gamma_x + gamma_w * s2)) + (n - m) / gamma_x))


def alpha_w(cache: OperatorCache, gamma_x: float, gamma_w: float) -> float:
    """Normalized trace of the noise-side posterior Jacobian."""
    m, _ = cache.shape
    s2 = cache.s * cache.s
    return float((gamma_w / m) * np.sum(s2 / (gamma_w * s2 + gamma_x)))


def lmmse_joint(cache: OperatorCache, y: np.ndarray, x_ext: GaussianMessage,
                w_ext: GaussianMessage) -> LmmseOutput:
    """Both posterior means plus trace summaries and posterior precisions."""
    ax = alpha_x(cache, x_ext.precision, w_ext.precision)
    aw = alpha_w(cache, x_ext.precision, w_ext.precision)
    return LmmseOutput(
        x_mean=lmmse_x(cache, y, x_ext, w_ext),
        w_mean=lmmse_w(cache, y, x_ext, w_ext),
        alpha_x=ax,
        alpha_w=aw,
        x_precision=x_ext.precision / ax,
        w_precision=w_ext.precision / aw,
    )


def joint_oracle(A: np.ndarray, y: np.ndarray, x_ext: GaussianMessage,
                 w_ext: GaussianMessage):
    """Dense conditional-Gaussian reference for small instances.

    Stacks z = [x; w], conditions N(mu_z, Sigma_z) on y = [A I] z, and
    returns (x_mean, w_mean, x_var_avg, w_var_avg). Cost is cubic in M + N;
    instances larger than M * N = 10^4 are rejected.
    """
    A = np.asarray(A, dtype=float)
    m, n = A.shape
    if m * n > 10_000:
        raise ValueError(f"joint_oracle is a small-instance reference (M*N <= 1e4), got {m}x{n}")
    y = np.asarray(y, dtype=float)
    B = np.hstack([A, np.eye(m)])
    prior_var = np.concatenate([
        np.full(n, 1.0 / x_ext.precision),
        np.full(m, 1.0 / w_ext.precision),
    ])
    mu = np.concatenate([x_ext.mean, w_ext.mean])
    S = (B * prior_var) @ B.T
    try:
        adj = np.linalg.solve(S, y - B @ mu)
        T = np.linalg.solve(S, B)
    except np.linalg.LinAlgError as exc:
        raise OracleFailure(f"conditioning matrix is singular: {exc}") from exc
    post_mean = mu + prior_var * (B.T @ adj)
    post_var = prior_var - prior_var * prior_var * np.einsum("ij,ij->j", B, T)
    if not (np.all(np.isfinite(post_mean)) and np.all(np.isfinite(post_var))):
        raise OracleFailure("conditioning produced non-finite output")
    return (
        post_mean[:n],
        post_mean[n:],
        float(np.mean(post_var[:n])),
        float(np.mean(post_var[n:])),
    )
