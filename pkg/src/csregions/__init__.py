"""Optimal reconstruction error and performance regions for noisy compressed
sensing of sparse Gaussian signals, with an AMP comparison harness."""

from .amp import AmpConfig, amp_reconstruct, state_evolution
from .errors import DomainError, NumericalError
from .prior import (
    SparseGaussianPrior,
    mutual_information,
    posterior_mean_var,
    scalar_mmse,
    scalar_mmse_oracle,
)
from .regions import Region, classify, rbp_vs_sparsity, three_fp_band, thresholds
from .tanaka import Branch, ChannelSpec, FixedPoint, find_fixed_points, free_energy, solve

__all__ = [
    "AmpConfig",
    "Branch",
    "ChannelSpec",
    "DomainError",
    "FixedPoint",
    "NumericalError",
    "Region",
    "SparseGaussianPrior",
    "amp_reconstruct",
    "classify",
    "find_fixed_points",
    "free_energy",
    "mutual_information",
    "posterior_mean_var",
    "rbp_vs_sparsity",
    "scalar_mmse",
    "scalar_mmse_oracle",
    "solve",
    "state_evolution",
    "three_fp_band",
    "thresholds",
]
