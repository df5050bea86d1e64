"""Sparse Gaussian (Bernoulli-Gaussian) signal model and scalar-channel statistics.

Every quantity here concerns the scalar channel

    u = sqrt(s) * x + z,    x ~ p N(0, 1) + (1 - p) delta_0,    z ~ N(0, 1),

where ``s`` is the effective SNR coefficient.  Two quadrature paths are
provided for the MMSE and the mutual information:

* ``scalar_mmse`` / ``mutual_information``: adaptive Gauss-Kronrod
  (QUADPACK) on a truncated, subdivided domain with a checked error bound.
* ``mmse_curve`` / ``mutual_information_curve``: a fixed composite
  Gauss-Legendre rule vectorised over many ``s`` at once.  The fixed-point
  solvers use this path; the tests pin it to the adaptive one.

All logarithms are natural (nats).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate

from .errors import DomainError, NumericalError

MMSE_TOL = 1e-10
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
GAUSS_ENTROPY = 0.5 * math.log(2.0 * math.pi * math.e)


@dataclass(frozen=True)
class SparseGaussianPrior:
    """Mixture ``p * N(0, 1) + (1 - p) * delta_0``.

    Attributes:
        p: sparsity rate, the probability that an entry is nonzero.
    """

    p: float

    def __post_init__(self):
        if not (math.isfinite(self.p) and 0.0 < self.p <= 1.0):
            raise DomainError(f"sparsity rate must lie in (0, 1], got {self.p!r}")

    @property
    def second_moment(self) -> float:
        return self.p

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` i.i.d. entries."""
        support = rng.random(size) < self.p
        return np.where(support, rng.standard_normal(size), 0.0)

    def sample_exact(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw a vector with exactly ``round(p * size)`` Gaussian nonzeros."""
        k = int(round(self.p * size))
        x = np.zeros(size)
        idx = rng.choice(size, size=k, replace=False)
        x[idx] = rng.standard_normal(k)
        return x


@dataclass(frozen=True)
class ScalarChannel:
    """``u = sqrt(snr_eff) * x + z`` with standard Gaussian ``z``."""

    snr_eff: float

    def __post_init__(self):
        _check_snr(self.snr_eff)

    def observe(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return math.sqrt(self.snr_eff) * x + rng.standard_normal(x.shape)


@dataclass(frozen=True)
class PosteriorStats:
    """Conditional mean and variance of ``x`` given an observation."""

    mean: float | np.ndarray
    var: float | np.ndarray


class OracleEstimate(NamedTuple):
    value: float
    stderr: float
    samples: int


def _as_prior(prior: SparseGaussianPrior | float) -> SparseGaussianPrior:
    if isinstance(prior, SparseGaussianPrior):
        return prior
    return SparseGaussianPrior(float(prior))


def _check_snr(s: float) -> float:
    s = float(s)
    if not math.isfinite(s) or s < 0.0:
        raise DomainError(f"effective SNR must be finite and nonnegative, got {s!r}")
    return s


def _log_weights(p: float) -> tuple[float, float]:
    log_spike = math.log1p(-p) if p < 1.0 else -math.inf
    return math.log(p), log_spike


def _output_log_components(p, s, y):
    """Log-densities of the two output components at ``y``.

    The slab part is ``p * N(y; 0, s + 1)`` and the spike part is
    ``(1 - p) * N(y; 0, 1)``.  Broadcasts over ``s`` and ``y``.
    """
    log_p, log_q = _log_weights(p)
    l1 = log_p - HALF_LOG_2PI - 0.5 * np.log1p(s) - 0.5 * y * y / (1.0 + s)
    l0 = log_q - HALF_LOG_2PI - 0.5 * y * y
    return l1, l0


def _mmse_excess_integrand(p, s, y):
    """``f(y) * pi(y) * (1 - pi(y)) * m(y)**2`` from the variance split.

    With ``pi`` the slab responsibility and ``m = sqrt(s) y / (s + 1)`` the slab
    posterior mean, ``MMSE = p / (s + 1) + integral of this over the real line``.
    Every term is nonnegative, so there is no cancellation at large ``s``.
    """
    l1, l0 = _output_log_components(p, s, y)
    with np.errstate(invalid="ignore"):
        log_mix = np.logaddexp(l1, l0)
        w = np.exp(l1 + l0 - log_mix)
    w = np.nan_to_num(w, nan=0.0)
    m = np.sqrt(s) * y / (1.0 + s)
    return w * m * m


def _neg_entropy_integrand(p, s, y):
    l1, l0 = _output_log_components(p, s, y)
    log_f = np.logaddexp(l1, l0)
    return -np.exp(log_f) * log_f


def _breakpoints(s: float, scale: float = 40.0) -> np.ndarray:
    """Subdivision of ``[0, scale * sqrt(s + 1)]`` for adaptive quadrature.

    Unit-width panels cover the region where the two components cross;
    geometric panels cover the slab tail.
    """
    upper = scale * math.sqrt(s + 1.0)
    head = np.arange(0.0, min(16.0, upper), 0.5)
    if upper <= 16.0:
        return np.append(head, upper)
    count = max(2, int(math.ceil(math.log2(upper / 16.0))) + 1)
    return np.concatenate([head, np.geomspace(16.0, upper, count)])


def _adaptive_half_line(func, s: float, tol: float) -> tuple[float, float]:
    edges = _breakpoints(s)
    pieces = len(edges) - 1
    total, err = 0.0, 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        for a, b in zip(edges[:-1], edges[1:]):
            try:
                val, e = integrate.quad(
                    func, a, b, epsabs=tol / (4.0 * pieces), epsrel=1e-13, limit=200
                )
            except integrate.IntegrationWarning as exc:
                raise NumericalError(
                    f"quadrature did not converge on [{a:g}, {b:g}] at s={s:g}: {exc}",
                    achieved=float("nan"),
                ) from exc
            total += val
            err += e
    return total, err


def scalar_mmse(prior: SparseGaussianPrior | float, s: float, tol: float = MMSE_TOL) -> float:
    """MMSE of estimating ``x`` from ``sqrt(s) x + z`` by adaptive quadrature.

    Args:
        prior: the signal prior, or its sparsity rate.
        s: effective SNR coefficient (``eta * gamma * R`` in the vector problem).
        tol: required absolute accuracy.

    Raises:
        DomainError: if ``s`` is negative or not finite.
        NumericalError: if the quadrature error estimate exceeds ``tol``.
    """
    prior = _as_prior(prior)
    s = _check_snr(s)
    p = prior.p
    base = p / (1.0 + s)
    if s == 0.0 or p == 1.0:
        return base
    half, err = _adaptive_half_line(lambda y: _mmse_excess_integrand(p, s, y), s, tol)
    if 2.0 * err > tol:
        raise NumericalError(
            f"MMSE quadrature error {2 * err:.3g} exceeds tolerance {tol:.3g}", achieved=2 * err
        )
    return base + 2.0 * half


def scalar_mmse_from_estimate_power(prior: SparseGaussianPrior | float, s: float) -> float:
    """MMSE written as ``p - E[xhat^2]``, integrating the estimate power directly.

    Algebraically identical to :func:`scalar_mmse`; it loses relative accuracy
    once the MMSE drops far below ``p`` and is kept only for cross-checks.
    """
    prior = _as_prior(prior)
    s = _check_snr(s)
    p = prior.p
    if s == 0.0:
        return p
    k = s + 1.0
    log_p, log_q = _log_weights(p)

    def integrand(y):
        # y^2 / (p e^{y^2/(2k)} + (1-p) sqrt(k) e^{(1-s) y^2/(2k)})
        t1 = log_p + y * y / (2.0 * k)
        t2 = log_q + 0.5 * math.log(k) + (1.0 - s) * y * y / (2.0 * k)
        return y * y * np.exp(-np.logaddexp(t1, t2))

    half, _ = _adaptive_half_line(integrand, s, MMSE_TOL)
    coeff = p * p * s / (math.sqrt(2.0 * math.pi) * k**2.5)
    return p - coeff * 2.0 * half


def mutual_information(prior: SparseGaussianPrior | float, s: float, tol: float = MMSE_TOL) -> float:
    """``I(x; sqrt(s) x + z)`` in nats, as ``h(Y) - h(Z)`` by adaptive quadrature."""
    prior = _as_prior(prior)
    s = _check_snr(s)
    p = prior.p
    if p == 1.0:
        return 0.5 * math.log1p(s)
    half, err = _adaptive_half_line(lambda y: _neg_entropy_integrand(p, s, y), s, tol)
    if 2.0 * err > tol:
        raise NumericalError(
            f"entropy quadrature error {2 * err:.3g} exceeds tolerance {tol:.3g}", achieved=2 * err
        )
    return max(2.0 * half - GAUSS_ENTROPY, 0.0)


# Fixed composite Gauss-Legendre rule.  The MMSE integrand is bounded by
# (1 - p) * phi(y) * y^2, so [0, 40] loses nothing representable.
_GL_X, _GL_W = leggauss(16)


def _composite_nodes(edges: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    return (half * _GL_X + 0.5 * (a + b)).ravel(), (half * _GL_W).ravel()


_MMSE_Y, _MMSE_W = _composite_nodes(np.concatenate([np.arange(0.0, 16.0, 0.25), np.arange(16.0, 40.5, 1.0)]))
_HEAD_Y, _HEAD_W = _composite_nodes(np.arange(0.0, 16.25, 0.25))
_TAIL_PANELS = 48
_CHUNK = 512


def mmse_curve(prior: SparseGaussianPrior | float, s) -> np.ndarray:
    """Vectorised MMSE over an array of effective SNRs (fixed quadrature rule)."""
    prior = _as_prior(prior)
    p = prior.p
    s = np.asarray(s, dtype=float)
    flat = s.ravel()
    if np.any(~np.isfinite(flat)) or np.any(flat < 0.0):
        raise DomainError("effective SNR must be finite and nonnegative")
    out = p / (1.0 + flat)
    if p < 1.0:
        for start in range(0, flat.size, _CHUNK):
            blk = flat[start : start + _CHUNK, None]
            vals = _mmse_excess_integrand(p, blk, _MMSE_Y[None, :])
            out[start : start + _CHUNK] += 2.0 * (vals @ _MMSE_W)
    return out.reshape(s.shape)


def mutual_information_curve(prior: SparseGaussianPrior | float, s) -> np.ndarray:
    """Vectorised mutual information in nats (fixed quadrature rule)."""
    prior = _as_prior(prior)
    p = prior.p
    s = np.asarray(s, dtype=float)
    flat = s.ravel()
    if np.any(~np.isfinite(flat)) or np.any(flat < 0.0):
        raise DomainError("effective SNR must be finite and nonnegative")
    if p == 1.0:
        return 0.5 * np.log1p(s)
    out = np.empty_like(flat)
    unit = np.linspace(0.0, 1.0, _TAIL_PANELS + 1)
    for i, si in enumerate(flat):
        head = _neg_entropy_integrand(p, si, _HEAD_Y) @ _HEAD_W
        upper = max(40.0 * math.sqrt(si + 1.0), 32.0)
        tail_y, tail_w = _composite_nodes(16.0 * (upper / 16.0) ** unit)
        tail = _neg_entropy_integrand(p, si, tail_y) @ tail_w
        out[i] = 2.0 * (head + tail) - GAUSS_ENTROPY
    return np.maximum(out, 0.0).reshape(s.shape)


def posterior_mean_var(prior: SparseGaussianPrior | float, u, noise_var: float) -> PosteriorStats:
    """Exact posterior mean and variance of ``x`` given ``u = x + w``.

    ``w ~ N(0, noise_var)``.  Responsibilities are formed in the log domain,
    so large ``|u|`` does not overflow.  Accepts scalar or array ``u``.
    """
    prior = _as_prior(prior)
    noise_var = float(noise_var)
    if not (math.isfinite(noise_var) and noise_var > 0.0):
        raise DomainError(f"noise variance must be positive, got {noise_var!r}")
    log_p, log_q = _log_weights(prior.p)
    u_arr = np.asarray(u, dtype=float)
    slab_var = 1.0 + noise_var
    l1 = log_p - 0.5 * math.log(slab_var) - 0.5 * u_arr * u_arr / slab_var
    l0 = log_q - 0.5 * math.log(noise_var) - 0.5 * u_arr * u_arr / noise_var
    log_mix = np.logaddexp(l1, l0)
    resp = np.exp(l1 - log_mix)
    with np.errstate(invalid="ignore"):
        resp_mix = np.nan_to_num(np.exp(l1 + l0 - 2.0 * log_mix), nan=0.0)
    m = u_arr / slab_var
    mean = resp * m
    var = resp * (noise_var / slab_var) + resp_mix * m * m
    if np.ndim(u) == 0:
        return PosteriorStats(float(mean), float(var))
    return PosteriorStats(mean, var)


def scalar_mmse_oracle(
    prior: SparseGaussianPrior | float, s: float, samples: int = 10**7, seed: int = 0
) -> OracleEstimate:
    """Monte-Carlo estimate of the scalar MMSE with its standard error.

    Samples ``(x, u)`` pairs, applies :func:`posterior_mean_var` and averages
    the squared error.  Deterministic for a fixed seed.
    """
    prior = _as_prior(prior)
    s = _check_snr(s)
    if samples < 10**5:
        raise DomainError(f"oracle needs at least 1e5 samples, got {samples}")
    rng = np.random.default_rng(seed)
    total = 0.0
    total_sq = 0.0
    block = 10**6
    done = 0
    while done < samples:
        n = min(block, samples - done)
        x = prior.sample(rng, n)
        z = rng.standard_normal(n)
        if s == 0.0:
            est = np.zeros(n)
        else:
            est = posterior_mean_var(prior, x + z / math.sqrt(s), 1.0 / s).mean
        err = (x - est) ** 2
        total += err.sum()
        total_sq += (err * err).sum()
        done += n
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0) * samples / (samples - 1)
    return OracleEstimate(mean, math.sqrt(var / samples), samples)


def mmse_low_noise_approx(prior: SparseGaussianPrior | float, s: float) -> float:
    """Leading high-SNR term ``p / s`` of the scalar MMSE."""
    prior = _as_prior(prior)
    s = _check_snr(s)
    if s == 0.0:
        raise DomainError("low-noise approximation needs s > 0")
    return prior.p / s
