"""Training-time augmentation: masked color jitter, raw-domain RGB rescale, random crop.

Jitter touches only the masked region: out = (1 - M) * img + M * T(img),
so the mask complement is bitwise unchanged. All randomness flows through
an explicit numpy Generator (PCG64) so factor draws replay exactly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .color import LinearImage, Mask, SrgbImage
from .errors import InvalidInputError

logger = logging.getLogger(__name__)

REC709_LUMA = np.array([0.2126, 0.7152, 0.0722])

_STAGES = ("brightness", "contrast", "saturation")


def make_rng(seed: Optional[int]) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _check_range(name: str, rng_pair: tuple[float, float]) -> None:
    lo, hi = rng_pair
    if not (0 < lo <= hi):
        raise InvalidInputError(f"{name} range must satisfy 0 < low <= high, got {rng_pair}")


@dataclass(frozen=True)
class JitterConfig:
    brightness_range: tuple[float, float] = (0.8, 2.0)
    saturation_range: tuple[float, float] = (0.8, 1.4)
    contrast_range: tuple[float, float] = (0.8, 1.4)
    rng_seed: Optional[int] = None
    # Default order is brightness -> contrast -> saturation; enabling shuffle
    # draws a per-sample order (recorded in the factors).
    shuffle_order: bool = False

    def __post_init__(self):
        _check_range("brightness", self.brightness_range)
        _check_range("saturation", self.saturation_range)
        _check_range("contrast", self.contrast_range)


@dataclass(frozen=True)
class JitterFactors:
    brightness: float
    contrast: float
    saturation: float
    order: tuple[str, ...] = _STAGES

    def as_dict(self) -> dict:
        return {
            "brightness": self.brightness,
            "contrast": self.contrast,
            "saturation": self.saturation,
            "order": list(self.order),
        }


@dataclass(frozen=True)
class AugmentPolicy:
    p_crop: float = 0.7
    crop_scale_range: tuple[float, float] = (0.7, 1.0)
    p_color: float = 0.3
    rgb_rescale_range: tuple[float, float] = (0.6, 1.4)

    def __post_init__(self):
        for name, p in (("p_crop", self.p_crop), ("p_color", self.p_color)):
            if not (0.0 <= p <= 1.0):
                raise InvalidInputError(f"{name} must be a probability, got {p}")
        _check_range("crop_scale", self.crop_scale_range)
        _check_range("rgb_rescale", self.rgb_rescale_range)


def sample_jitter_factors(cfg: JitterConfig, rng: np.random.Generator) -> JitterFactors:
    order = _STAGES
    if cfg.shuffle_order:
        order = tuple(_STAGES[i] for i in rng.permutation(3))
    return JitterFactors(
        brightness=float(rng.uniform(*cfg.brightness_range)),
        contrast=float(rng.uniform(*cfg.contrast_range)),
        saturation=float(rng.uniform(*cfg.saturation_range)),
        order=order,
    )


def _jitter_stage(values: np.ndarray, masked: np.ndarray, stage: str, f: float) -> np.ndarray:
    if stage == "brightness":
        out = values * f
    elif stage == "contrast":
        # Anchor on the mean luma of the masked region.
        anchor = float((values[masked] @ REC709_LUMA).mean())
        out = (values - anchor) * f + anchor
    elif stage == "saturation":
        luma = (values @ REC709_LUMA)[..., None]
        out = luma + (values - luma) * f
    else:  # pragma: no cover - guarded by JitterFactors construction
        raise InvalidInputError(f"unknown jitter stage {stage!r}")
    return np.clip(out, 0.0, 1.0)


def apply_color_jitter(img: SrgbImage, mask: Mask, factors: JitterFactors) -> SrgbImage:
    """Deterministically apply the jitter stages inside the mask."""
    if not mask.matches(img):
        raise InvalidInputError("mask dimensions do not match image")
    masked = mask.bool_array
    if not masked.any():
        return img

    values = img.data.copy()
    by_name = {
        "brightness": factors.brightness,
        "contrast": factors.contrast,
        "saturation": factors.saturation,
    }
    for stage in factors.order:
        values = _jitter_stage(values, masked, stage, by_name[stage])

    out = img.data.copy()
    out[masked] = values[masked]
    return SrgbImage(out)


def masked_color_jitter(img: SrgbImage, mask: Mask, cfg: JitterConfig,
                        rng: Optional[np.random.Generator] = None,
                        factors: Optional[JitterFactors] = None) -> SrgbImage:
    """Draw factors from cfg ranges and jitter the masked region."""
    if factors is None:
        if rng is None:
            rng = make_rng(cfg.rng_seed)
        factors = sample_jitter_factors(cfg, rng)
    return apply_color_jitter(img, mask, factors)


def sample_rgb_rescale(policy: AugmentPolicy, rng: np.random.Generator) -> tuple[float, float, float]:
    lo, hi = policy.rgb_rescale_range
    return tuple(float(rng.uniform(lo, hi)) for _ in range(3))


def global_rgb_rescale(img: LinearImage, factors) -> LinearImage:
    """Multiply each channel by its factor in the linear domain."""
    f = np.asarray(factors, dtype=np.float64).reshape(-1)
    if f.shape != (3,):
        raise InvalidInputError(f"expected three rescale factors, got {factors!r}")
    if not (np.isfinite(f).all() and (f > 0).all()):
        raise InvalidInputError(f"rescale factors must be positive, got {f.tolist()}")
    return LinearImage(img.data * f)


def mask_bbox(mask: Mask) -> Optional[tuple[int, int, int, int]]:
    """Inclusive-exclusive (y0, x0, y1, x1) bounds of the set pixels, or None."""
    ys, xs = np.nonzero(mask.data)
    if ys.size == 0:
        return None
    return int(ys.min()), int(xs.min()), int(ys.max()) + 1, int(xs.max()) + 1


def choose_crop_window(height: int, width: int,
                       bbox: Optional[tuple[int, int, int, int]],
                       policy: AugmentPolicy,
                       rng: np.random.Generator) -> Optional[tuple[int, int, int, int]]:
    """Pick a (y0, x0, h, w) window containing the bbox, or None when impossible."""
    scale = float(rng.uniform(*policy.crop_scale_range))
    crop_h = max(1, int(round(scale * height)))
    crop_w = max(1, int(round(scale * width)))

    y_lo, x_lo = 0, 0
    y_hi, x_hi = height - crop_h, width - crop_w
    if bbox is not None:
        by0, bx0, by1, bx1 = bbox
        if by1 - by0 > crop_h or bx1 - bx0 > crop_w:
            return None
        y_lo, y_hi = max(y_lo, by1 - crop_h), min(y_hi, by0)
        x_lo, x_hi = max(x_lo, bx1 - crop_w), min(x_hi, bx0)
    if y_hi < y_lo or x_hi < x_lo:
        return None
    y0 = int(rng.integers(y_lo, y_hi + 1))
    x0 = int(rng.integers(x_lo, x_hi + 1))
    return y0, x0, crop_h, crop_w


def crop_to_window(img: SrgbImage, mask: Mask,
                   window: tuple[int, int, int, int]) -> tuple[SrgbImage, Mask]:
    y0, x0, h, w = window
    return (SrgbImage(img.data[y0:y0 + h, x0:x0 + w]),
            Mask(mask.data[y0:y0 + h, x0:x0 + w]))


def random_crop(img: SrgbImage, mask: Mask, policy: AugmentPolicy,
                rng: np.random.Generator) -> tuple[SrgbImage, Mask]:
    """Crop both image and mask so the mask's bounding box stays fully inside.

    When no window of the drawn size can contain the mask, the crop is
    skipped (logged, not an error).
    """
    if not mask.matches(img):
        raise InvalidInputError("mask dimensions do not match image")
    window = choose_crop_window(img.height, img.width, mask_bbox(mask), policy, rng)
    if window is None:
        logger.info("random_crop skipped: no window contains the mask bbox")
        return img, mask
    return crop_to_window(img, mask, window)
