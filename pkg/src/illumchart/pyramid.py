"""High-frequency extraction of multi-channel planes via a small Laplacian pyramid.

Planes are (H, W) or (H, W, C) float arrays with unrestricted range. The
kernel and resampling rules are protocol constants: any backend that runs
its own copy of this decomposition must match these bit conventions (see
the golden-tensor files under golden/).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

# Separable binomial kernel; the outer product is the 3x3 [1,2,1]x[1,2,1]/16.
KERNEL_1D = np.array([1.0, 2.0, 1.0]) / 4.0

UPSAMPLE_MODES = ("bilinear", "nearest")


@dataclass(frozen=True)
class PyramidConfig:
    levels: int = 2
    upsample: str = "bilinear"

    def __post_init__(self):
        if not (1 <= self.levels <= 6):
            raise InvalidInputError(f"pyramid levels must be in [1, 6], got {self.levels}")
        if self.upsample not in UPSAMPLE_MODES:
            raise InvalidInputError(f"unknown upsample mode {self.upsample!r}")


def _as_plane(p) -> tuple[np.ndarray, bool]:
    arr = np.asarray(p, dtype=np.float64)
    squeezed = arr.ndim == 2
    if squeezed:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise InvalidInputError(f"expected (H, W) or (H, W, C) plane, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1 or arr.shape[2] < 1:
        raise InvalidInputError(f"degenerate plane shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise InvalidInputError("plane contains non-finite values")
    return arr, squeezed


def _restore(arr: np.ndarray, squeezed: bool) -> np.ndarray:
    return arr[:, :, 0] if squeezed else arr


def gaussian_blur3(p) -> np.ndarray:
    """Separable 3x3 binomial blur with replicate-padded borders."""
    arr, squeezed = _as_plane(p)
    v = np.pad(arr, ((1, 1), (0, 0), (0, 0)), mode="edge")
    v = (v[:-2] + 2.0 * v[1:-1] + v[2:]) / 4.0
    h = np.pad(v, ((0, 0), (1, 1), (0, 0)), mode="edge")
    h = (h[:, :-2] + 2.0 * h[:, 1:-1] + h[:, 2:]) / 4.0
    return _restore(h, squeezed)


def downsample_avg2(p) -> np.ndarray:
    """Non-overlapping 2x2 average pooling; odd trailing row/column replicated first."""
    arr, squeezed = _as_plane(p)
    if arr.shape[0] < 2 or arr.shape[1] < 2:
        raise InvalidInputError(f"cannot downsample plane of shape {arr.shape[:2]}")
    if arr.shape[0] % 2:
        arr = np.concatenate([arr, arr[-1:]], axis=0)
    if arr.shape[1] % 2:
        arr = np.concatenate([arr, arr[:, -1:]], axis=1)
    out = (arr[0::2, 0::2] + arr[0::2, 1::2] + arr[1::2, 0::2] + arr[1::2, 1::2]) / 4.0
    return _restore(out, squeezed)


def _axis_coords(n_src: int, n_dst: int) -> tuple[np.ndarray, np.ndarray]:
    # Corner-aligned mapping: dst i -> src i * (n_src - 1) / (n_dst - 1).
    if n_src == 1 or n_dst == 1:
        return np.zeros(n_dst, dtype=np.intp), np.zeros(n_dst)
    pos = np.arange(n_dst) * ((n_src - 1) / (n_dst - 1))
    i0 = np.minimum(np.floor(pos).astype(np.intp), n_src - 2)
    return i0, pos - i0


def upsample2(p, target_h: int, target_w: int, mode: str = "bilinear") -> np.ndarray:
    """Resize a plane up to (target_h, target_w) with corner-aligned interpolation."""
    arr, squeezed = _as_plane(p)
    h, w = arr.shape[:2]
    if target_h < h or target_w < w:
        raise InvalidInputError(
            f"target ({target_h}, {target_w}) smaller than source ({h}, {w})"
        )
    if mode not in UPSAMPLE_MODES:
        raise InvalidInputError(f"unknown upsample mode {mode!r}")

    yi, yf = _axis_coords(h, target_h)
    xi, xf = _axis_coords(w, target_w)
    if mode == "nearest":
        yn = yi + (yf >= 0.5)
        xn = xi + (xf >= 0.5)
        return _restore(arr[yn][:, xn], squeezed)

    # Lerp as v0 + f*(v1 - v0) so constant planes stay bitwise constant.
    yi1 = np.minimum(yi + 1, h - 1)
    xi1 = np.minimum(xi + 1, w - 1)
    top = arr[yi]
    rows = top + yf[:, None, None] * (arr[yi1] - top)
    left = rows[:, xi]
    out = left + xf[None, :, None] * (rows[:, xi1] - left)
    return _restore(out, squeezed)


def high_freq_extract(p, cfg: PyramidConfig = PyramidConfig()) -> np.ndarray:
    """Accumulate per-level (plane - blur) bands, each resampled to full resolution.

    Level 0 contributes directly; deeper levels are computed on the
    downsampled blurred plane and upsampled straight back to the input
    resolution before being added. Output shape equals input shape.
    """
    arr, squeezed = _as_plane(p)
    full_h, full_w = arr.shape[:2]
    if min(full_h, full_w) < 2**cfg.levels:
        raise InvalidInputError(
            f"plane of shape {arr.shape[:2]} too small for {cfg.levels} levels"
        )

    curr = arr
    acc = None
    for level in range(cfg.levels):
        blurred = gaussian_blur3(curr)
        band = curr - blurred
        if level == 0:
            acc = band
        else:
            acc = acc + upsample2(band, full_h, full_w, cfg.upsample)
        if level + 1 < cfg.levels:
            curr = downsample_avg2(blurred)
    return _restore(acc, squeezed)
