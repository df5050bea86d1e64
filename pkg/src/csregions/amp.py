"""Approximate message passing with the Bayes-optimal Bernoulli-Gaussian denoiser.

Measurements follow ``y = sqrt(gamma) Phi x + z`` where ``Phi`` is M x N with
i.i.d. N(0, 1/N) entries (unit-norm rows in expectation) and ``z ~ N(0, I)``.
Internally the problem is rescaled to the usual AMP normalisation

    y / sqrt(gamma R) = A x + w,   A = Phi / sqrt(R),   w ~ N(0, 1 / (gamma R)),

so that ``A`` has N(0, 1/M) entries.  The effective noise of the denoiser
then evolves as ``tau2 = 1/(gamma R) + mse / R = 1 / (eta gamma R)``, which is
Tanaka's scalar channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DomainError
from .prior import SparseGaussianPrior, mmse_curve, posterior_mean_var
from .tanaka import ChannelSpec, FixedPoint, find_fixed_points

SE_TOL = 1e-12
MATCH_TOL = 1e-6
DIVERGENCE_FACTOR = 10.0


@dataclass(frozen=True)
class AmpConfig:
    max_iters: int = 200
    tol: float = 1e-6
    damping: float = 0.0
    row_normalize: bool = False

    def __post_init__(self):
        if self.max_iters < 1:
            raise DomainError("max_iters must be at least 1")
        if not self.tol > 0.0:
            raise DomainError("tol must be positive")
        if not 0.0 <= self.damping < 1.0:
            raise DomainError("damping must lie in [0, 1)")


@dataclass
class AmpTrace:
    """Per-iteration effective noise variance and, with ground truth, MSE."""

    tau2: list[float] = field(default_factory=list)
    mse: list[float] | None = None
    iterations: int = 0
    converged: bool = False
    diverged: bool = False


class AmpResult(NamedTuple):
    estimate: np.ndarray
    trace: AmpTrace


class StateEvolution(NamedTuple):
    trajectory: list[float]
    limit: FixedPoint
    matched: bool


def gaussian_matrix(rng: np.random.Generator, m: int, n: int, row_normalize: bool = False) -> np.ndarray:
    """M x N matrix with i.i.d. N(0, 1/N) entries, optionally exact unit-norm rows."""
    phi = rng.standard_normal((m, n)) / math.sqrt(n)
    if row_normalize:
        phi /= np.linalg.norm(phi, axis=1, keepdims=True)
    return phi


def amp_reconstruct(
    y: np.ndarray,
    phi: np.ndarray,
    gamma: float,
    prior: SparseGaussianPrior,
    cfg: AmpConfig = AmpConfig(),
    x_true: np.ndarray | None = None,
) -> AmpResult:
    """Estimate ``x`` from ``y = sqrt(gamma) phi x + z`` by AMP.

    Stops when the relative change of the estimate drops below ``cfg.tol``,
    after ``cfg.max_iters`` iterations, or on divergence: the predicted MSE
    exceeds ten times the prior variance, or the residual variance exceeds ten
    times its starting value.  Divergence is reported in the trace, not raised.

    Args:
        y: length-M measurements.
        phi: M x N sensing matrix with unit-norm rows.
        gamma: inverse noise level (linear).
        prior: signal prior.
        cfg: iteration settings.
        x_true: optional ground truth; enables the per-iteration MSE trace.
    """
    y = np.asarray(y, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if phi.ndim != 2 or y.shape != (phi.shape[0],):
        raise DomainError(f"dimension mismatch: y {y.shape}, phi {phi.shape}")
    if not gamma > 0.0:
        raise DomainError("gamma must be positive")
    m, n = phi.shape
    if x_true is not None and np.shape(x_true) != (n,):
        raise DomainError("x_true must have length N")
    rate = m / n
    scale = 1.0 / math.sqrt(rate)
    y_t = y / math.sqrt(gamma * rate)
    noise_var = 1.0 / (gamma * rate)

    trace = AmpTrace(mse=[] if x_true is not None else None)
    x = np.zeros(n)
    z = y_t.copy()
    mean_var = prior.p
    tau2 = noise_var + mean_var / rate
    tau2_start = tau2
    for it in range(1, cfg.max_iters + 1):
        r = x + scale * (phi.T @ z)
        post = posterior_mean_var(prior, r, tau2)
        x_new, v_new = post.mean, float(np.mean(post.var))
        if cfg.damping:
            x_new = (1.0 - cfg.damping) * x_new + cfg.damping * x
            v_new = (1.0 - cfg.damping) * v_new + cfg.damping * mean_var
        z = y_t - scale * (phi @ x_new) + z * (v_new / (rate * tau2))
        tau2 = noise_var + v_new / rate
        change = np.linalg.norm(x_new - x)
        norm = np.linalg.norm(x_new)
        x, mean_var = x_new, v_new

        trace.tau2.append(tau2)
        if trace.mse is not None:
            trace.mse.append(float(np.mean((x - x_true) ** 2)))
        trace.iterations = it
        residual_var = float(z @ z) / m
        if (
            not math.isfinite(residual_var)
            or v_new > DIVERGENCE_FACTOR * prior.p
            or residual_var > DIVERGENCE_FACTOR * tau2_start
        ):
            trace.diverged = True
            break
        if change <= cfg.tol * norm or norm == 0.0:
            trace.converged = True
            break
    return AmpResult(x, trace)


def state_evolution(spec: ChannelSpec, cfg: AmpConfig = AmpConfig()) -> StateEvolution:
    """Iterate ``eta <- 1 / (1 + gamma mmse(eta gamma R))`` from ``1 / (1 + gamma p)``.

    The start corresponds to an estimate with MSE ``p`` (no information).
    The limit is matched to the nearest root from the fixed-point solver;
    ``matched`` is False when they differ by more than 1e-6.
    """
    p, gamma, rate = spec.p, spec.gamma, spec.rate
    eta = 1.0 / (1.0 + gamma * p)
    trajectory = [eta]
    for _ in range(10 * cfg.max_iters):
        m = float(mmse_curve(p, np.array([eta * gamma * rate]))[0])
        nxt = 1.0 / (1.0 + gamma * m)
        trajectory.append(nxt)
        done = abs(nxt - eta) < SE_TOL
        eta = nxt
        if done:
            break
    fps = find_fixed_points(spec)
    limit = min(fps, key=lambda fp: abs(fp.eta - eta))
    return StateEvolution(trajectory, limit, abs(limit.eta - eta) <= MATCH_TOL)
