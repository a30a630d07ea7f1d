"""Reference-view recovery and scoring for multi-image super-resolution series."""
__version__ = "0.1.0"

from ._kernels import BACKEND as KERNEL_BACKEND
from .baseline_sr import SrConfig, SrResult, bicubic_sisr, shift_and_add
from .imaging import Translation, downsample_hr, downscale_mask, upsample_bicubic, warp, warp_mask
from .metrics import CpsnrReport, cpsnr, evaluate_corpus, masked_rmse
from .reference import (
    HeuristicWeights,
    ReferenceDecision,
    Scene,
    clearance_fraction,
    clearance_reference,
    clearance_sum,
    find_true_reference,
    heuristic_reference,
    median_reference,
)
from .registration import RegistrationConfig, RegistrationResult, align_views, estimate_translation
from .synthetic import SceneTruth, SyntheticConfig, generate_corpus, generate_scene

__all__ = [
    "KERNEL_BACKEND",
    "CpsnrReport",
    "HeuristicWeights",
    "ReferenceDecision",
    "RegistrationConfig",
    "RegistrationResult",
    "Scene",
    "SceneTruth",
    "SrConfig",
    "SrResult",
    "SyntheticConfig",
    "Translation",
    "align_views",
    "bicubic_sisr",
    "clearance_fraction",
    "clearance_reference",
    "clearance_sum",
    "cpsnr",
    "downsample_hr",
    "downscale_mask",
    "estimate_translation",
    "evaluate_corpus",
    "find_true_reference",
    "generate_corpus",
    "generate_scene",
    "heuristic_reference",
    "masked_rmse",
    "median_reference",
    "shift_and_add",
    "upsample_bicubic",
    "warp",
    "warp_mask",
]
