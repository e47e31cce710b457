"""Image containers and core color math.

Convention: images are height x width x 3 float64 arrays, RGB channel
order, row-major. Linear-raw values are >= 0 and may exceed 1 (pre-clip
highlights); gamma-encoded values are clamped to [0, 1]. Containers copy
their input and freeze the buffer, so every operation is pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import InvalidInputError


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=np.float64, copy=True)
    out.flags.writeable = False
    return out


def _check_image_shape(arr: np.ndarray) -> None:
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise InvalidInputError(f"expected HxWx3 image data, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidInputError("image must have at least one pixel")
    if not np.isfinite(arr).all():
        raise InvalidInputError("image contains non-finite values")


@dataclass(frozen=True)
class LinearImage:
    """Raw-domain RGB image: finite, >= 0, nominal range [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        _check_image_shape(arr)
        if (arr < 0).any():
            raise InvalidInputError("linear image contains negative values")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class SrgbImage:
    """Gamma-encoded RGB image: finite, clamped to [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        _check_image_shape(arr)
        if (arr < 0).any() or (arr > 1).any():
            raise InvalidInputError("gamma-encoded image values must lie in [0, 1]")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class Mask:
    """Binary per-pixel mask, height x width, values in {0, 1}."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise InvalidInputError(f"expected HxW mask data, got shape {arr.shape}")
        if not np.isin(arr, (0, 1)).all():
            raise InvalidInputError("mask values must be 0 or 1")
        out = arr.astype(np.uint8, copy=True)
        out.flags.writeable = False
        object.__setattr__(self, "data", out)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def matches(self, image: Union[LinearImage, SrgbImage]) -> bool:
        return (self.height, self.width) == (image.height, image.width)

    @property
    def bool_array(self) -> np.ndarray:
        return self.data.astype(bool)


@dataclass(frozen=True)
class Illuminant:
    """Unit-norm RGB chromaticity of a light source."""

    r: float
    g: float
    b: float

    def __post_init__(self):
        v = (self.r, self.g, self.b)
        if not all(math.isfinite(c) and c >= 0 for c in v):
            raise InvalidInputError(f"illuminant components must be finite and >= 0, got {v}")
        n = math.sqrt(self.r**2 + self.g**2 + self.b**2)
        if abs(n - 1.0) > 1e-9:
            raise InvalidInputError(f"illuminant must be unit-norm, got |v| = {n!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.r, self.g, self.b])

    def green_anchored(self) -> np.ndarray:
        """Gains scaled so the green component is 1 (von Kries convention)."""
        if min(self.r, self.g, self.b) <= 0:
            raise InvalidInputError("green anchoring needs all components > 0")
        return np.array([self.r / self.g, 1.0, self.b / self.g])


IlluminantLike = Union[Illuminant, Sequence[float], np.ndarray]


def _as_vector(v: IlluminantLike) -> np.ndarray:
    if isinstance(v, Illuminant):
        return v.as_array()
    arr = np.asarray(v, dtype=np.float64).reshape(-1)
    if arr.shape != (3,):
        raise InvalidInputError(f"expected an RGB triple, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise InvalidInputError("RGB triple contains non-finite values")
    return arr


def normalize_illuminant(v: IlluminantLike) -> Illuminant:
    """Normalize a non-negative, nonzero RGB triple to unit Euclidean norm."""
    arr = _as_vector(v)
    if (arr < 0).any():
        raise InvalidInputError(f"illuminant components must be non-negative, got {arr.tolist()}")
    n = float(np.linalg.norm(arr))
    if n == 0.0:
        raise InvalidInputError("cannot normalize the zero vector")
    unit = arr / n
    return Illuminant(float(unit[0]), float(unit[1]), float(unit[2]))


def angular_error(est: IlluminantLike, gt: IlluminantLike) -> float:
    """Angle between two RGB vectors in degrees; scale-invariant in both.

    Computed as 2 * atan2(|a - b|, |a + b|) on the unit vectors, which
    equals arccos of the clamped cosine but stays exact near 0 and 180
    degrees where arccos loses precision.
    """
    a = _as_vector(est)
    b = _as_vector(gt)
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise InvalidInputError("angular error is undefined for a zero vector")
    ua = a / na
    ub = b / nb
    diff = float(np.linalg.norm(ua - ub))
    summ = float(np.linalg.norm(ua + ub))
    return math.degrees(2.0 * math.atan2(diff, summ))


def gamma_encode(img: LinearImage, gamma: float = 2.2) -> SrgbImage:
    """Map linear v to clamp(v, 0, 1) ** (1/gamma)."""
    if not (math.isfinite(gamma) and gamma > 0):
        raise InvalidInputError(f"gamma must be positive, got {gamma!r}")
    clipped = np.clip(img.data, 0.0, 1.0)
    return SrgbImage(np.power(clipped, 1.0 / gamma))


def gamma_decode(img: SrgbImage, gamma: float = 2.2) -> LinearImage:
    """Map gamma-encoded v to v ** gamma (inverse of gamma_encode on [0, 1])."""
    if not (math.isfinite(gamma) and gamma > 0):
        raise InvalidInputError(f"gamma must be positive, got {gamma!r}")
    return LinearImage(np.power(img.data, gamma))


def apply_white_balance(img: LinearImage, illum: Illuminant) -> LinearImage:
    """Divide each channel by the green-anchored illuminant gain."""
    gains = illum.green_anchored()
    return LinearImage(img.data / gains)


def angular_errors_per_pixel(pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    """Per-pixel angle in degrees between two HxWx3 vector fields."""
    pn = np.linalg.norm(pred, axis=-1, keepdims=True)
    gn = np.linalg.norm(gt, axis=-1, keepdims=True)
    if (pn == 0).any() or (gn == 0).any():
        raise InvalidInputError("zero vector in illuminant field")
    up = pred / pn
    ug = gt / gn
    diff = np.linalg.norm(up - ug, axis=-1)
    summ = np.linalg.norm(up + ug, axis=-1)
    return np.degrees(2.0 * np.arctan2(diff, summ))


def mean_illuminant(vectors: Iterable[IlluminantLike]) -> Illuminant:
    """Average unit chromaticities and renormalize."""
    units = [_as_vector(v) for v in vectors]
    if not units:
        raise InvalidInputError("cannot average an empty set of illuminants")
    stacked = np.stack([u / np.linalg.norm(u) for u in units])
    return normalize_illuminant(stacked.mean(axis=0))
