"""Illuminant estimation by compositing a neutral color checker into the scene,
harmonizing it with a pluggable inpainting backend, and reading the light color
back out of the achromatic patches. Ships classical statistical baselines and
an angular-error evaluation harness."""

from .color import (
    Illuminant,
    LinearImage,
    Mask,
    SrgbImage,
    angular_error,
    apply_white_balance,
    gamma_decode,
    gamma_encode,
    normalize_illuminant,
)
from .checker import (
    CheckerLayout,
    CheckerPlacement,
    PatchSample,
    composite_checker,
    estimate_illuminant_from_patches,
    render_neutral_checker,
    sample_patches,
)
from .pyramid import PyramidConfig, gaussian_blur3, downsample_avg2, upsample2, high_freq_extract
from .baselines import BaselineConfig, BaselineMethod, estimate_baseline
from .engine import (
    EstimateConfig,
    IlluminantMap,
    PlacementPolicy,
    SpatialConfig,
    estimate_single,
    estimate_spatial,
    map_mae,
)
from .evaluate import AngularStats, ProtocolSpec, compute_stats, run_protocol

__version__ = "0.1.0"

__all__ = [
    "AngularStats",
    "BaselineConfig",
    "BaselineMethod",
    "CheckerLayout",
    "CheckerPlacement",
    "EstimateConfig",
    "Illuminant",
    "IlluminantMap",
    "LinearImage",
    "Mask",
    "PatchSample",
    "PlacementPolicy",
    "ProtocolSpec",
    "PyramidConfig",
    "SpatialConfig",
    "SrgbImage",
    "angular_error",
    "apply_white_balance",
    "composite_checker",
    "compute_stats",
    "downsample_avg2",
    "estimate_baseline",
    "estimate_illuminant_from_patches",
    "estimate_single",
    "estimate_spatial",
    "gamma_decode",
    "gamma_encode",
    "gaussian_blur3",
    "high_freq_extract",
    "map_mae",
    "normalize_illuminant",
    "render_neutral_checker",
    "run_protocol",
    "sample_patches",
    "upsample2",
]
