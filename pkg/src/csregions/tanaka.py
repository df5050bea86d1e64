"""Tanaka's fixed-point equation, its free energy and fixed-point selection.

The vector channel ``y = sqrt(gamma) Phi x + z`` decouples into scalar
channels with effective SNR ``eta * gamma * R``, where the degradation
``eta`` solves

    1 / eta = 1 + gamma * mmse(p, eta * gamma * R).

We work with the root form ``g(eta) = 1 - eta - eta * gamma * mmse`` which is
positive near ``eta = 0`` and negative at ``eta = 1``.  When several roots
coexist the physical one minimises

    E(eta) = I(x; sqrt(eta gamma R) x + z) + (R / 2) (eta - 1 - ln eta),

whose stationary points are exactly the roots of ``g`` when both terms are
measured in nats.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar

from .errors import DomainError
from .prior import SparseGaussianPrior, mmse_curve, mutual_information, mutual_information_curve

ENERGY_BASES = ("nats", "mixed")
GRID_POINTS = 4000
TANGENCY_TOL = 1e-9
TIE_TOL = 1e-9

_LOG_S_MIN, _LOG_S_MAX = math.log(1e-12), math.log(1e14)
_TABLE_POINTS = 6000


class Branch(str, enum.Enum):
    """Position of a fixed point among those coexisting at one channel."""

    SMALLEST = "smallest"
    MIDDLE = "middle"
    LARGEST = "largest"
    UNIQUE = "unique"


@dataclass(frozen=True)
class ChannelSpec:
    """Sparsity rate, inverse noise level (linear) and measurement rate."""

    p: float
    gamma: float
    rate: float

    def __post_init__(self):
        if not (math.isfinite(self.p) and 0.0 < self.p <= 1.0):
            raise DomainError(f"sparsity rate must lie in (0, 1], got {self.p!r}")
        if not (math.isfinite(self.gamma) and self.gamma > 0.0):
            raise DomainError(f"gamma must be positive, got {self.gamma!r}")
        if not (0.0 < self.rate < 1.0):
            raise DomainError(f"measurement rate must lie in (0, 1), got {self.rate!r}")

    @classmethod
    def from_db(cls, p: float, gamma_db: float, rate: float) -> ChannelSpec:
        return cls(p, db_to_linear(gamma_db), rate)

    @property
    def gamma_db(self) -> float:
        return 10.0 * math.log10(self.gamma)

    @property
    def prior(self) -> SparseGaussianPrior:
        return SparseGaussianPrior(self.p)


@dataclass(frozen=True)
class FixedPoint:
    """One root of Tanaka's equation.

    Attributes:
        eta: channel degradation in (0, 1].
        a: ``eta * gamma``; for the small branches this is the constant that
            stays put as gamma grows.
        mmse: scalar MMSE at effective SNR ``eta * gamma * R``.
        free_energy: E(eta), in the configured energy base.
        branch: ordering among the coexisting roots.
        degenerate: True for a tangential (double) root.
    """

    eta: float
    a: float
    mmse: float
    free_energy: float
    branch: Branch
    degenerate: bool = False


class Solution(NamedTuple):
    selected: FixedPoint
    fixed_points: list[FixedPoint]
    degenerate: bool


@dataclass(frozen=True)
class SurfaceRow:
    rate: float
    gamma: float
    mmse: float
    fixed_point_count: int
    eta: float

    @property
    def gamma_db(self) -> float:
        return 10.0 * math.log10(self.gamma)


def db_to_linear(gamma_db: float) -> float:
    return 10.0 ** (gamma_db / 10.0)


def _check_base(energy_base: str) -> None:
    if energy_base not in ENERGY_BASES:
        raise DomainError(f"energy_base must be one of {ENERGY_BASES}, got {energy_base!r}")


def _check_eta(eta: float) -> float:
    eta = float(eta)
    if not (0.0 < eta <= 1.0):
        raise DomainError(f"eta must lie in (0, 1], got {eta!r}")
    return eta


@lru_cache(maxsize=64)
def _log_mmse_table(p: float) -> CubicSpline:
    log_s = np.linspace(_LOG_S_MIN, _LOG_S_MAX, _TABLE_POINTS)
    return CubicSpline(log_s, np.log(mmse_curve(p, np.exp(log_s))))


def _mmse_scan(p: float, s: np.ndarray) -> np.ndarray:
    """MMSE on a scan grid: spline inside the table range, direct elsewhere."""
    out = np.empty_like(s)
    inside = (s >= 1e-12) & (s <= 1e14)
    if np.any(inside):
        out[inside] = np.exp(_log_mmse_table(p)(np.log(s[inside])))
    if np.any(~inside):
        out[~inside] = mmse_curve(p, s[~inside])
    return out


def _g(spec: ChannelSpec, eta: float) -> float:
    m = float(mmse_curve(spec.p, np.array([eta * spec.gamma * spec.rate]))[0])
    return 1.0 - eta - eta * spec.gamma * m


def tanaka_residual(spec: ChannelSpec, eta: float) -> float:
    """``g(eta) = 1 - eta - eta * gamma * mmse(p, eta * gamma * R)``."""
    return _g(spec, _check_eta(eta))


def eta_grid(spec: ChannelSpec) -> np.ndarray:
    """Log-spaced below 1e-2, linear above; 4000 points in total.

    The lower end drops below 1e-9 only when gamma is so large that
    ``g`` would not yet be positive there.
    """
    lo = min(1e-9, 0.5 / (1.0 + spec.gamma * spec.p))
    half = GRID_POINTS // 2
    return np.concatenate([np.geomspace(lo, 1e-2, half), np.linspace(1e-2, 1.0, half + 1)[1:]])


def _bisect(spec: ChannelSpec, lo: float, hi: float) -> float:
    lo, hi = float(lo), float(hi)
    g_lo = _g(spec, lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        g_mid = _g(spec, mid)
        if g_mid == 0.0:
            return mid
        if (g_mid > 0.0) == (g_lo > 0.0):
            lo, g_lo = mid, g_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _extremum(spec: ChannelSpec, lo: float, hi: float, sign: float) -> tuple[float, float]:
    """Locate the extremum of g in [lo, hi]; ``sign`` is +1 for a minimum."""
    # optimise in log-eta so the small-eta branch is resolved
    res = minimize_scalar(
        lambda t: sign * _g(spec, math.exp(t)),
        bounds=(math.log(lo), math.log(hi)),
        method="bounded",
        options={"xatol": 1e-12},
    )
    eta = math.exp(res.x)
    return eta, _g(spec, eta)


def _locate_roots(spec: ChannelSpec, refine: bool = True) -> list[tuple[float, bool]]:
    """Roots of g in (0, 1] as ``(eta, degenerate)`` pairs, ascending."""
    grid = eta_grid(spec)
    g = 1.0 - grid - grid * spec.gamma * _mmse_scan(spec.p, grid * spec.gamma * spec.rate)
    pos = g > 0.0
    roots: list[tuple[float, bool]] = []
    crossings = np.flatnonzero(pos[:-1] != pos[1:])
    for i in crossings:
        if refine:
            roots.append((_bisect(spec, grid[i], grid[i + 1]), False))
        else:
            roots.append((grid[i], False))

    # Tangencies, or pairs of roots closer than one grid step, sit at a
    # near-zero local extremum of g with no crossing beside it.
    dg = np.diff(g)
    turning = np.flatnonzero(dg[:-1] * dg[1:] <= 0.0) + 1
    near = set(crossings) | set(crossings + 1)
    for i in turning:
        if abs(g[i]) > 1e-3 or i in near or (i - 1) in near:
            continue
        lo, hi = grid[i - 1], grid[i + 1]
        sign = 1.0 if g[i] > 0.0 else -1.0
        eta_x, g_x = _extremum(spec, lo, hi, sign)
        if (g_x > 0.0) != (g[i] > 0.0):
            if refine:
                roots.append((_bisect(spec, lo, eta_x), False))
                roots.append((_bisect(spec, eta_x, hi), False))
            else:
                roots.extend([(lo, False), (hi, False)])
        elif abs(g_x) < TANGENCY_TOL:
            roots.append((eta_x, True))
    roots.sort()
    if not roots:
        raise RuntimeError(f"no fixed point found for {spec}; g(0+) > 0 > g(1) guarantees one")
    return roots


def count_fixed_points(spec: ChannelSpec) -> int:
    """Number of distinct roots of Tanaka's equation (a tangency counts once)."""
    return len(_locate_roots(spec, refine=False))


def _branches(n: int) -> list[Branch]:
    if n == 1:
        return [Branch.UNIQUE]
    return [Branch.SMALLEST] + [Branch.MIDDLE] * (n - 2) + [Branch.LARGEST]


def _energy_penalty(rate: float, eta: float, energy_base: str) -> float:
    log_eta = math.log2(eta) if energy_base == "mixed" else math.log(eta)
    return 0.5 * rate * (eta - 1.0 - log_eta)


def free_energy(spec: ChannelSpec, eta: float, energy_base: str = "nats") -> float:
    """E(eta) with the mutual information from adaptive quadrature.

    ``energy_base="mixed"`` uses ``log2`` in the penalty term while keeping the
    mutual information in nats, which is the literal published form.
    """
    eta = _check_eta(eta)
    _check_base(energy_base)
    info = mutual_information(spec.p, eta * spec.gamma * spec.rate)
    return info + _energy_penalty(spec.rate, eta, energy_base)


def _free_energy_fast(spec: ChannelSpec, eta: float, energy_base: str) -> float:
    info = float(mutual_information_curve(spec.p, np.array([eta * spec.gamma * spec.rate]))[0])
    return info + _energy_penalty(spec.rate, eta, energy_base)


def find_fixed_points(spec: ChannelSpec, energy_base: str = "nats") -> list[FixedPoint]:
    """All roots of Tanaka's equation, sorted by eta, with free energies."""
    _check_base(energy_base)
    roots = _locate_roots(spec)
    out = []
    for (eta, degenerate), branch in zip(roots, _branches(len(roots))):
        eta = float(eta)
        s = eta * spec.gamma * spec.rate
        out.append(
            FixedPoint(
                eta=eta,
                a=eta * spec.gamma,
                mmse=float(mmse_curve(spec.p, np.array([s]))[0]),
                free_energy=_free_energy_fast(spec, eta, energy_base),
                branch=branch,
                degenerate=degenerate,
            )
        )
    return out


def solve(spec: ChannelSpec, energy_base: str = "nats") -> Solution:
    """Select the fixed point of minimum free energy.

    Energies within ``TIE_TOL`` of the minimum count as tied; the tie goes to
    the largest eta and the solution is flagged degenerate.
    """
    fps = find_fixed_points(spec, energy_base)
    e_min = min(fp.free_energy for fp in fps)
    tied = [fp for fp in fps if fp.free_energy - e_min < TIE_TOL]
    selected = max(tied, key=lambda fp: fp.eta)
    degenerate = len(tied) > 1 or selected.degenerate
    return Solution(selected, fps, degenerate)


def free_energy_asymptotic(spec: ChannelSpec, fp: FixedPoint, energy_base: str = "nats") -> float:
    """Large-gamma approximation of E at a fixed point.

    Uses ``I ~ (p / 2) ln(eta gamma R)``.  The small branches keep their
    constant ``a = eta * gamma``; the largest uses ``eta = 1 - p / R``.  A
    unique fixed point is treated as the largest when ``eta`` is closer to
    ``1 - p / R`` than to zero.  With ``energy_base="mixed"`` the ``log2``
    penalty of the published form is reproduced.
    """
    _check_base(energy_base)
    p, r, gamma = spec.p, spec.rate, spec.gamma
    ln_b = math.log(2.0) if energy_base == "mixed" else 1.0
    coeff = 0.5 * (p - r / ln_b)
    eta3 = 1.0 - p / r
    branch = fp.branch
    if branch is Branch.UNIQUE:
        branch = Branch.LARGEST if eta3 > 0 and fp.eta > 0.5 * eta3 else Branch.SMALLEST
    if branch is Branch.LARGEST:
        return coeff * math.log(eta3) + 0.5 * p * math.log(r / math.e) + 0.5 * p * math.log(gamma)
    a = fp.a
    return (
        coeff * math.log(a)
        + 0.5 * p * math.log(r)
        + 0.5 * r * a / gamma
        - 0.5 * r
        + 0.5 * r * math.log(gamma) / ln_b
    )


def _surface_cell(args) -> SurfaceRow:
    p, rate, gamma, energy_base = args
    sol = solve(ChannelSpec(p, gamma, rate), energy_base)
    return SurfaceRow(rate, gamma, sol.selected.mmse, len(sol.fixed_points), sol.selected.eta)


def mmse_surface(
    p: float,
    rate_grid,
    gamma_grid,
    energy_base: str = "nats",
    workers: int | None = None,
) -> list[SurfaceRow]:
    """Selected MMSE over an (R, gamma) grid, rate-major order.

    ``workers > 1`` evaluates cells in separate processes; the output order
    does not depend on it.
    """
    rate_grid, gamma_grid = list(rate_grid), list(gamma_grid)
    if not rate_grid or not gamma_grid:
        raise DomainError("surface grids must be nonempty")
    _check_base(energy_base)
    cells = [(p, float(r), float(g), energy_base) for r in rate_grid for g in gamma_grid]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_surface_cell, cells, chunksize=8))
    return [_surface_cell(c) for c in cells]
