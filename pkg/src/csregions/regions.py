"""Performance thresholds and region classification in the (R, gamma) plane.

For fixed gamma, sweeping the measurement rate R upward from the robust
threshold ``R_r = p`` passes through

* ``R_c(gamma)``: three fixed points appear (consistency threshold),
* ``R_l(gamma)``: the free-energy minimiser jumps from the smallest to the
  largest root (low-noise threshold),
* ``R_bp(gamma)``: the two small roots annihilate (BP threshold).

Both band edges are strictly decreasing in gamma, which lets the
single-fixed-point regions be split by looking at the band at gamma alone.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError
from .tanaka import Branch, ChannelSpec, count_fixed_points, db_to_linear, solve

SCAN_STEP = 1e-3
BISECT_TOL = 1e-5
REFERENCE_GAMMAS_DB = tuple(float(d) for d in range(10, 81))
DEFAULT_GAMMA_REF = 1e7


class Region(str, enum.Enum):
    UNROBUST = "Unrobust"
    REGION1 = "Region1"
    REGION2 = "Region2"
    REGION3 = "Region3"
    REGION4 = "Region4"
    REGION5 = "Region5"


@dataclass(frozen=True)
class ThresholdSet:
    """Thresholds at one gamma; the band ones are None when no band exists."""

    gamma: float
    r_robust: float
    r_consistency: float | None = None
    r_low_noise: float | None = None
    r_bp: float | None = None

    @property
    def gamma_db(self) -> float:
        return 10.0 * math.log10(self.gamma)


@dataclass(frozen=True)
class RegionLabel:
    region: Region
    fixed_point_count: int
    selected_branch: Branch


def _check_p(p: float) -> None:
    if not (0.0 < p <= 1.0):
        raise DomainError(f"sparsity rate must lie in (0, 1], got {p!r}")


def robust_threshold(p: float) -> float:
    """Smallest rate with finite noise sensitivity: ``R_r = p``."""
    _check_p(p)
    return p


def noise_sensitivity_limit(p: float, rate: float) -> float:
    """Low-noise limit of MMSE / noise variance, ``p / (R - p)``."""
    if rate <= p:
        return math.inf
    return p / (rate - p)


def _has_three(p: float, gamma: float, rate: float) -> bool:
    return count_fixed_points(ChannelSpec(p, gamma, rate)) == 3


def _bisect_rate(pred, lo: float, hi: float) -> float:
    """Boundary between ``pred(lo)`` and ``pred(hi)`` (which must differ)."""
    want_lo = pred(lo)
    while hi - lo > BISECT_TOL:
        mid = 0.5 * (lo + hi)
        if pred(mid) == want_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@lru_cache(maxsize=1024)
def three_fp_band(p: float, gamma: float) -> tuple[float, float] | None:
    """R-interval ``(R_c, R_bp)`` inside ``(p, 1)`` with three fixed points.

    The count is scanned at steps of 1e-3 and both edges are bisected to
    1e-5.  Returns None when no scanned rate has three roots.
    """
    _check_p(p)
    if p >= 1.0:
        return None
    rates = np.arange(p + SCAN_STEP, 1.0, SCAN_STEP)
    three = np.array([_has_three(p, gamma, float(r)) for r in rates])
    if not three.any():
        return None
    idx = np.flatnonzero(three)
    # keep the longest contiguous run
    runs = np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1)
    run = max(runs, key=len)
    first, last = int(run[0]), int(run[-1])

    def pred(r):
        return _has_three(p, gamma, r)

    lo_edge = float(rates[first])
    if first > 0:
        lo_edge = _bisect_rate(pred, float(rates[first - 1]), float(rates[first]))
    hi_edge = float(rates[last])
    if last + 1 < len(rates):
        hi_edge = _bisect_rate(pred, float(rates[last]), float(rates[last + 1]))
    return lo_edge, hi_edge


def _selects_largest(p: float, gamma: float, rate: float, energy_base: str) -> bool:
    return solve(ChannelSpec(p, gamma, rate), energy_base).selected.branch is Branch.LARGEST


def low_noise_threshold(p: float, gamma: float, energy_base: str = "nats") -> float | None:
    """Rate inside the band where the selected root switches to the largest."""
    band = three_fp_band(p, gamma)
    if band is None:
        return None
    lo, hi = band[0] + 2 * BISECT_TOL, band[1] - 2 * BISECT_TOL
    if lo >= hi:
        return band[0]
    if _selects_largest(p, gamma, lo, energy_base):
        return band[0]
    if not _selects_largest(p, gamma, hi, energy_base):
        return band[1]
    return _bisect_rate(lambda r: _selects_largest(p, gamma, r, energy_base), lo, hi)


def thresholds(p: float, gamma: float, energy_base: str = "nats") -> ThresholdSet:
    band = three_fp_band(p, gamma)
    if band is None:
        return ThresholdSet(gamma, robust_threshold(p))
    return ThresholdSet(
        gamma=gamma,
        r_robust=robust_threshold(p),
        r_consistency=band[0],
        r_low_noise=low_noise_threshold(p, gamma, energy_base),
        r_bp=band[1],
    )


@lru_cache(maxsize=64)
def sup_bp_threshold(p: float, gammas_db: tuple[float, ...] = REFERENCE_GAMMAS_DB) -> float | None:
    """Largest R_bp over a reference gamma grid; Region 1 lies above it."""
    edges = [b[1] for b in (three_fp_band(p, db_to_linear(d)) for d in gammas_db) if b is not None]
    return max(edges) if edges else None


def _classify_interior(p, rate, gamma, count, energy_base) -> RegionLabel:
    spec = ChannelSpec(p, gamma, rate)
    if count == 3:
        branch = solve(spec, energy_base).selected.branch
        region = Region.REGION3 if branch is Branch.LARGEST else Region.REGION2
        return RegionLabel(region, 3, branch)
    sup = sup_bp_threshold(p)
    if sup is None or rate >= sup:
        return RegionLabel(Region.REGION1, 1, Branch.UNIQUE)
    # R_c and R_bp both decrease with gamma: below the band at this gamma
    # means gamma is under this rate's three-root interval, above means over.
    band = three_fp_band(p, gamma)
    if band is None or rate < band[0]:
        return RegionLabel(Region.REGION4, 1, Branch.UNIQUE)
    return RegionLabel(Region.REGION5, 1, Branch.UNIQUE)


def classify(p: float, rate: float, gamma: float, energy_base: str = "nats") -> RegionLabel:
    """Region of the point ``(rate, gamma)`` for sparsity ``p``.

    Two coexisting roots only occur on a band edge; such points take the label
    of the nearest interior point on either side.
    """
    _check_p(p)
    if not 0.0 < rate < 1.0:
        raise DomainError(f"measurement rate must lie in (0, 1), got {rate!r}")
    if rate <= p:
        sol = solve(ChannelSpec(p, gamma, rate), energy_base)
        return RegionLabel(Region.UNROBUST, len(sol.fixed_points), sol.selected.branch)
    count = count_fixed_points(ChannelSpec(p, gamma, rate))
    if count == 2:
        for step in (BISECT_TOL, 2 * BISECT_TOL, 5 * BISECT_TOL):
            for r in (rate - step, rate + step):
                if p < r < 1.0:
                    c = count_fixed_points(ChannelSpec(p, gamma, r))
                    if c != 2:
                        label = _classify_interior(p, r, gamma, c, energy_base)
                        return RegionLabel(label.region, 2, label.selected_branch)
    return _classify_interior(p, rate, gamma, min(count, 3), energy_base)


def rbp_vs_sparsity(p_list, gamma_ref: float = DEFAULT_GAMMA_REF) -> list[tuple[float, float | None]]:
    """Upper band edge R_bp at ``gamma_ref`` for each sparsity rate, sorted by p."""
    rows = []
    for p in sorted(float(v) for v in p_list):
        band = three_fp_band(p, gamma_ref)
        rows.append((p, None if band is None else band[1]))
    return rows
