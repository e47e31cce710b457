"""Classical statistical illuminant estimators.

All estimators share the saturation rule: pixels with any channel above
the (absolute, linear-domain) saturation threshold are excluded from the
statistics, derivatives included. Estimates are unit-normalized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from scipy import ndimage

from .color import Illuminant, LinearImage, Mask, normalize_illuminant
from .errors import EstimationFailedError, InvalidInputError


class BaselineMethod(str, Enum):
    GRAY_WORLD = "gray_world"
    WHITE_PATCH = "white_patch"
    SHADES_OF_GRAY = "shades_of_gray"
    GRAY_EDGE_1 = "gray_edge_1"
    GRAY_EDGE_2 = "gray_edge_2"
    GENERAL_GRAY_WORLD = "general_gray_world"


# Common literature defaults; the comparator tables never restate them.
DEFAULT_MINKOWSKI_P = 6.0
DEFAULT_EDGE_SIGMA = 1.0
DEFAULT_GGW_SIGMA = 2.0


@dataclass(frozen=True)
class BaselineConfig:
    method: BaselineMethod = BaselineMethod.GRAY_WORLD
    minkowski_p: float = DEFAULT_MINKOWSKI_P
    smoothing_sigma: Optional[float] = None
    saturation_threshold: float = 0.95

    def __post_init__(self):
        object.__setattr__(self, "method", BaselineMethod(self.method))
        if self.minkowski_p < 1:
            raise InvalidInputError(f"minkowski_p must be >= 1, got {self.minkowski_p}")
        if self.smoothing_sigma is not None and self.smoothing_sigma < 0:
            raise InvalidInputError(f"smoothing_sigma must be >= 0, got {self.smoothing_sigma}")
        if not (0 < self.saturation_threshold):
            raise InvalidInputError("saturation_threshold must be positive")

    @property
    def resolved_sigma(self) -> float:
        if self.smoothing_sigma is not None:
            return self.smoothing_sigma
        if self.method in (BaselineMethod.GRAY_EDGE_1, BaselineMethod.GRAY_EDGE_2):
            return DEFAULT_EDGE_SIGMA
        if self.method is BaselineMethod.GENERAL_GRAY_WORLD:
            return DEFAULT_GGW_SIGMA
        return 0.0


def _valid_pixels(img: LinearImage, threshold: float, exclude: Optional[Mask]) -> np.ndarray:
    valid = (img.data <= threshold).all(axis=-1)
    if exclude is not None:
        if not exclude.matches(img):
            raise InvalidInputError("exclusion mask dimensions do not match image")
        valid &= ~exclude.bool_array
    return valid


def _minkowski_mean(values: np.ndarray, p: float) -> np.ndarray:
    """Per-channel (mean(v^p))^(1/p) over an (N, 3) sample, overflow-safe."""
    if p == 1.0:
        return values.mean(axis=0)
    scale = float(values.max())
    if scale == 0.0:
        return np.zeros(3)
    return np.power(np.power(values / scale, p).mean(axis=0), 1.0 / p) * scale


def _smoothed(img_data: np.ndarray, sigma: float) -> np.ndarray:
    if sigma <= 0:
        return img_data
    return np.stack(
        [ndimage.gaussian_filter(img_data[:, :, c], sigma, mode="nearest") for c in range(3)],
        axis=-1,
    )


def _derivative_magnitude(img_data: np.ndarray, order: int, sigma: float) -> np.ndarray:
    """Gaussian-derivative magnitude per channel; sigma 0 uses central differences."""
    mags = []
    for c in range(3):
        ch = img_data[:, :, c]
        if sigma > 0:
            if order == 1:
                dy = ndimage.gaussian_filter(ch, sigma, order=(1, 0), mode="nearest")
                dx = ndimage.gaussian_filter(ch, sigma, order=(0, 1), mode="nearest")
                mag = np.hypot(dx, dy)
            else:
                dyy = ndimage.gaussian_filter(ch, sigma, order=(2, 0), mode="nearest")
                dxx = ndimage.gaussian_filter(ch, sigma, order=(0, 2), mode="nearest")
                dxy = ndimage.gaussian_filter(ch, sigma, order=(1, 1), mode="nearest")
                mag = np.sqrt(dxx**2 + 4.0 * dxy**2 + dyy**2)
        else:
            dy, dx = np.gradient(ch)
            if order == 1:
                mag = np.hypot(dx, dy)
            else:
                dyy, _ = np.gradient(dy)
                dxy, dxx = np.gradient(dx)
                mag = np.sqrt(dxx**2 + 4.0 * dxy**2 + dyy**2)
        mags.append(np.abs(mag))
    return np.stack(mags, axis=-1)


def estimate_baseline(img: LinearImage, cfg: BaselineConfig = BaselineConfig(),
                      exclude: Optional[Mask] = None) -> Illuminant:
    """Estimate the scene illuminant with the configured statistical method.

    `exclude` marks pixels to ignore entirely (e.g. a physical checker's
    bounding box during evaluation).
    """
    valid = _valid_pixels(img, cfg.saturation_threshold, exclude)
    if not valid.any():
        raise EstimationFailedError("all pixels excluded by saturation threshold / mask")

    method = cfg.method
    if method is BaselineMethod.GRAY_WORLD:
        est = img.data[valid].mean(axis=0)
    elif method is BaselineMethod.WHITE_PATCH:
        est = img.data[valid].max(axis=0)
    elif method is BaselineMethod.SHADES_OF_GRAY:
        est = _minkowski_mean(img.data[valid], cfg.minkowski_p)
    elif method is BaselineMethod.GENERAL_GRAY_WORLD:
        est = _minkowski_mean(_smoothed(img.data, cfg.resolved_sigma)[valid], cfg.minkowski_p)
    else:
        order = 1 if method is BaselineMethod.GRAY_EDGE_1 else 2
        mag = _derivative_magnitude(img.data, order, cfg.resolved_sigma)
        est = _minkowski_mean(mag[valid], cfg.minkowski_p)
        if not (est > 0).any():
            raise EstimationFailedError(
                "zero derivative energy: constant image has no edge statistics"
            )

    norm = float(np.linalg.norm(est))
    if norm == 0.0 or not math.isfinite(norm):
        raise EstimationFailedError(f"{method.value} produced a degenerate estimate {est}")
    return normalize_illuminant(est)
