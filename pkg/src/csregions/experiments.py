"""Monte-Carlo comparison of AMP against the Tanaka predictions.

Each trial draws a sparse Gaussian signal, a sensing matrix with unit-norm
rows and unit-variance noise, forms ``y = sqrt(gamma) Phi x + z`` and runs
AMP.  Trial streams come from ``numpy.random.SeedSequence`` keyed on
``(seed, rate index, gamma index, trial index)``, so any subset of trials can
run in any order or process and still reproduce bit for bit.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .amp import AmpConfig, amp_reconstruct, gaussian_matrix
from .errors import DomainError
from .prior import SparseGaussianPrior
from .regions import RegionLabel, classify
from .tanaka import ChannelSpec, db_to_linear, find_fixed_points, solve


@dataclass(frozen=True)
class ExperimentConfig:
    p: float
    n: int
    rates: tuple[float, ...]
    gammas_db: tuple[float, ...]
    trials: int
    seed: int = 0
    amp: AmpConfig = field(default_factory=AmpConfig)
    exact_sparsity: bool = False
    energy_base: str = "nats"

    def __post_init__(self):
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        object.__setattr__(self, "gammas_db", tuple(float(g) for g in self.gammas_db))
        SparseGaussianPrior(self.p)
        if self.n < 100:
            raise DomainError("signal length must be at least 100")
        if self.trials < 1:
            raise DomainError("need at least one trial")
        if not self.rates or not self.gammas_db:
            raise DomainError("rate and gamma grids must be nonempty")
        if any(not 0.0 < r < 1.0 for r in self.rates):
            raise DomainError("rates must lie in (0, 1)")

    def measurements(self, rate: float) -> int:
        return int(round(rate * self.n))

    def trial_seed(self, rate_index: int, gamma_index: int, trial_index: int) -> np.random.SeedSequence:
        return np.random.SeedSequence(self.seed, spawn_key=(rate_index, gamma_index, trial_index))


@dataclass(frozen=True)
class TrialResult:
    empirical_mse: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class ComparisonRow:
    rate: float
    gamma_db: float
    mean_mse: float
    std_err: float
    tanaka_mmse: float
    smallest_fp_mmse: float
    region: RegionLabel
    nonconverged_trials: int


def _run_indexed(cfg: ExperimentConfig, ri: int, gi: int, trial_index: int) -> TrialResult:
    rate, gamma = cfg.rates[ri], db_to_linear(cfg.gammas_db[gi])
    rng = np.random.default_rng(cfg.trial_seed(ri, gi, trial_index))
    prior = SparseGaussianPrior(cfg.p)
    m = cfg.measurements(rate)
    x = prior.sample_exact(rng, cfg.n) if cfg.exact_sparsity else prior.sample(rng, cfg.n)
    phi = gaussian_matrix(rng, m, cfg.n, cfg.amp.row_normalize)
    y = math.sqrt(gamma) * (phi @ x) + rng.standard_normal(m)
    result = amp_reconstruct(y, phi, gamma, prior, cfg.amp)
    mse = float(np.mean((result.estimate - x) ** 2))
    return TrialResult(mse, result.trace.iterations, result.trace.converged)


def run_trial(cfg: ExperimentConfig, rate: float, gamma_db: float, trial_index: int) -> TrialResult:
    """One reproducible AMP run at a grid cell of ``cfg``."""
    try:
        ri, gi = cfg.rates.index(float(rate)), cfg.gammas_db.index(float(gamma_db))
    except ValueError:
        raise DomainError(f"({rate}, {gamma_db}) is not a cell of the configured grid") from None
    if not 0 <= trial_index < cfg.trials:
        raise DomainError(f"trial index {trial_index} outside [0, {cfg.trials})")
    return _run_indexed(cfg, ri, gi, trial_index)


def mean_and_stderr(values) -> tuple[float, float]:
    """Sample mean and standard error (sample std / sqrt(count))."""
    arr = np.asarray(values, dtype=float)
    if arr.size < 2:
        return float(arr.mean()), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size))


def _run_cell_trials(args) -> list[TrialResult]:
    cfg, ri, gi = args
    return [_run_indexed(cfg, ri, gi, t) for t in range(cfg.trials)]


def run_cell(cfg: ExperimentConfig, rate: float, gamma_db: float) -> list[TrialResult]:
    ri, gi = cfg.rates.index(float(rate)), cfg.gammas_db.index(float(gamma_db))
    return _run_cell_trials((cfg, ri, gi))


def run_grid(cfg: ExperimentConfig, workers: int | None = None) -> list[ComparisonRow]:
    """Run every cell and attach the theoretical predictions.

    Rows are ordered by (rate, gamma_db).  Non-converged trials stay in the
    average and are counted in ``nonconverged_trials``.
    """
    cells = [(cfg, ri, gi) for ri in range(len(cfg.rates)) for gi in range(len(cfg.gammas_db))]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_cell_trials, cells))
    else:
        outcomes = [_run_cell_trials(c) for c in cells]

    rows = []
    for (_, ri, gi), trials in zip(cells, outcomes):
        rate, gamma_db = cfg.rates[ri], cfg.gammas_db[gi]
        spec = ChannelSpec(cfg.p, db_to_linear(gamma_db), rate)
        mean, se = mean_and_stderr([t.empirical_mse for t in trials])
        sol = solve(spec, cfg.energy_base)
        smallest = find_fixed_points(spec, cfg.energy_base)[0]
        rows.append(
            ComparisonRow(
                rate=rate,
                gamma_db=gamma_db,
                mean_mse=mean,
                std_err=se,
                tanaka_mmse=sol.selected.mmse,
                smallest_fp_mmse=smallest.mmse,
                region=classify(cfg.p, rate, spec.gamma, cfg.energy_base),
                nonconverged_trials=sum(not t.converged for t in trials),
            )
        )
    rows.sort(key=lambda r: (r.rate, r.gamma_db))
    return rows
