"""Inference pipeline: composite a neutral checker, harmonize via a backend,
read the illuminant back out of the achromatic patches.

Single-illuminant flow: gamma-encode -> composite checker -> backend call
-> gamma-decode -> patch sampling -> achromatic estimate. Spatially
varying flow runs that per grid cell and interpolates the per-cell
estimates over the image.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .checker import (
    CheckerLayout,
    CheckerPlacement,
    PatchSample,
    centered_placement,
    composite_checker,
    estimate_illuminant_from_patches,
    placement_from_bbox,
    sample_patches,
)
from .color import (
    Illuminant,
    LinearImage,
    angular_errors_per_pixel,
    gamma_decode,
    gamma_encode,
)
from .errors import EstimationFailedError, InvalidInputError, TransportError
from .protocol import BackendConfig, BackendRequest
from .transport import BackendClient

PLACEMENT_MODES = ("centered", "explicit", "bbox")


@dataclass(frozen=True)
class PlacementPolicy:
    mode: str = "centered"
    center: Optional[tuple[float, float]] = None
    checker_width: Optional[int] = None
    width_fraction: float = 0.32
    bbox: Optional[tuple[float, float, float, float]] = None

    def __post_init__(self):
        if self.mode not in PLACEMENT_MODES:
            raise InvalidInputError(f"unknown placement mode {self.mode!r}")
        if self.mode == "explicit" and (self.center is None or self.checker_width is None):
            raise InvalidInputError("explicit placement needs center and checker_width")


@dataclass(frozen=True)
class EstimateConfig:
    gamma: float = 2.2
    layout: CheckerLayout = CheckerLayout()
    placement: PlacementPolicy = PlacementPolicy()
    backend_config: BackendConfig = BackendConfig()
    emit_debug: bool = False


@dataclass(frozen=True)
class SpatialConfig:
    grid_rows: int = 4
    grid_cols: int = 4
    interpolation: str = "bilinear"

    def __post_init__(self):
        if self.grid_rows < 1 or self.grid_cols < 1:
            raise InvalidInputError("spatial grid must be at least 1x1")
        if self.interpolation != "bilinear":
            raise InvalidInputError(f"unknown interpolation {self.interpolation!r}")


@dataclass(frozen=True)
class IlluminantMap:
    """Per-pixel unit-norm illuminant field, H x W x 3."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise InvalidInputError(f"expected HxWx3 field, got {arr.shape}")
        norms = np.linalg.norm(arr, axis=-1)
        if not np.allclose(norms, 1.0, atol=1e-6):
            raise InvalidInputError("illuminant map must be unit-norm per pixel")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass
class EstimateDiagnostics:
    request_id: str
    placement_rect: tuple[int, int, int, int]
    samples: list[PatchSample]
    used_patch_indices: list[int]
    backend_name: str
    backend_model_id: str
    backend_elapsed_ms: int
    estimate: tuple[float, float, float]
    # Wall-clock timings are volatile and excluded from the canonical form.
    timings_ms: dict = field(default_factory=dict)
    # Present only when EstimateConfig.emit_debug is set; never serialized.
    debug_images: Optional[dict] = None

    def canonical_dict(self) -> dict:
        return {
            "request_id": self.request_id,
            "placement_rect": list(self.placement_rect),
            "samples": [
                {
                    "patch_index": s.patch_index,
                    "mean_rgb": list(s.mean_rgb),
                    "median_rgb": list(s.median_rgb),
                    "pixel_count": s.pixel_count,
                }
                for s in self.samples
            ],
            "used_patch_indices": self.used_patch_indices,
            "backend": {
                "name": self.backend_name,
                "model_id": self.backend_model_id,
                "elapsed_ms": self.backend_elapsed_ms,
            },
            "estimate": list(self.estimate),
        }

    def canonical_json(self) -> str:
        return json.dumps(self.canonical_dict(), sort_keys=True)


def resolve_placement(policy: PlacementPolicy, width: int, height: int,
                      layout: CheckerLayout = CheckerLayout(),
                      bbox: Optional[Sequence[float]] = None) -> CheckerPlacement:
    if policy.mode == "explicit":
        return CheckerPlacement(center=policy.center, checker_width=policy.checker_width)
    if policy.mode == "bbox":
        box = policy.bbox if policy.bbox is not None else bbox
        if box is None:
            raise InvalidInputError("bbox placement requested but no bbox available")
        return placement_from_bbox(box, layout)
    return centered_placement(width, height, policy.width_fraction)


def _deterministic_request_id(img: LinearImage, rect: tuple[int, int, int, int]) -> str:
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(img.data).tobytes())
    digest.update(repr(rect).encode())
    return digest.hexdigest()[:32]


def _usable_patch_indices(samples: list[PatchSample], layout: CheckerLayout) -> list[int]:
    from .checker import CLIP_LEVEL, NOISE_FLOOR

    used = []
    for idx in layout.achromatic_indices:
        med = np.asarray(samples[idx].median_rgb)
        if (med >= CLIP_LEVEL).any() or (med <= NOISE_FLOOR).any():
            continue
        used.append(idx)
    return used


def estimate_single(img: LinearImage, cfg: EstimateConfig, backend: BackendClient,
                    bbox: Optional[Sequence[float]] = None,
                    placement: Optional[CheckerPlacement] = None,
                    ) -> tuple[Illuminant, EstimateDiagnostics]:
    """Estimate one global illuminant for the image."""
    t0 = time.perf_counter()
    if placement is None:
        placement = resolve_placement(cfg.placement, img.width, img.height, cfg.layout, bbox)
    rect = placement.rect(cfg.layout)

    encoded = gamma_encode(img, cfg.gamma)
    composited, mask = composite_checker(encoded, cfg.layout, placement)

    req = BackendRequest(
        request_id=_deterministic_request_id(img, rect),
        image=composited,
        mask=mask,
        config=cfg.backend_config,
    )
    t1 = time.perf_counter()
    resp = backend.call(req)
    t2 = time.perf_counter()

    decoded = gamma_decode(resp.image, cfg.gamma)
    samples = sample_patches(decoded, cfg.layout, placement)
    illum = estimate_illuminant_from_patches(samples, cfg.layout)
    t3 = time.perf_counter()

    diag = EstimateDiagnostics(
        request_id=req.request_id,
        placement_rect=rect,
        samples=samples,
        used_patch_indices=_usable_patch_indices(samples, cfg.layout),
        backend_name=resp.backend_info.name,
        backend_model_id=resp.backend_info.model_id,
        backend_elapsed_ms=resp.backend_info.elapsed_ms,
        estimate=(illum.r, illum.g, illum.b),
        timings_ms={
            "prepare": (t1 - t0) * 1e3,
            "backend": (t2 - t1) * 1e3,
            "extract": (t3 - t2) * 1e3,
        },
        debug_images=(
            {"composited": composited, "backend_output": resp.image}
            if cfg.emit_debug else None
        ),
    )
    return illum, diag


def _cell_rects(width: int, height: int, sp: SpatialConfig):
    for r in range(sp.grid_rows):
        y0 = round(r * height / sp.grid_rows)
        y1 = round((r + 1) * height / sp.grid_rows)
        for c in range(sp.grid_cols):
            x0 = round(c * width / sp.grid_cols)
            x1 = round((c + 1) * width / sp.grid_cols)
            yield r, c, (x0, y0, x1 - x0, y1 - y0)


def _fill_invalid_cells(estimates: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Inverse-distance fill of failed cells from valid neighbours (grid space)."""
    if valid.all():
        return estimates
    filled = estimates.copy()
    vr, vc = np.nonzero(valid)
    for r, c in zip(*np.nonzero(~valid)):
        d2 = (vr - r) ** 2 + (vc - c) ** 2
        w = 1.0 / d2
        v = (estimates[vr, vc] * w[:, None]).sum(axis=0) / w.sum()
        filled[r, c] = v / np.linalg.norm(v)
    return filled


def _interpolate_cells(estimates: np.ndarray, width: int, height: int,
                       sp: SpatialConfig) -> np.ndarray:
    """Bilinear over cell centers with edge clamping, renormalized per pixel."""
    rows, cols = sp.grid_rows, sp.grid_cols
    cell_h, cell_w = height / rows, width / cols

    u = np.clip((np.arange(width) + 0.5) / cell_w - 0.5, 0.0, cols - 1)
    v = np.clip((np.arange(height) + 0.5) / cell_h - 0.5, 0.0, rows - 1)
    ui = np.minimum(u.astype(np.intp), max(cols - 2, 0))
    vi = np.minimum(v.astype(np.intp), max(rows - 2, 0))
    uf = (u - ui)[None, :, None]
    vf = (v - vi)[:, None, None]
    ui1 = np.minimum(ui + 1, cols - 1)
    vi1 = np.minimum(vi + 1, rows - 1)

    tl = estimates[vi][:, ui]
    tr = estimates[vi][:, ui1]
    bl = estimates[vi1][:, ui]
    br = estimates[vi1][:, ui1]
    top = tl + uf * (tr - tl)
    bottom = bl + uf * (br - bl)
    blended = top + vf * (bottom - top)
    return blended / np.linalg.norm(blended, axis=-1, keepdims=True)


def estimate_spatial(img: LinearImage, cfg: EstimateConfig, sp: SpatialConfig,
                     backend: BackendClient,
                     ) -> tuple[IlluminantMap, list[Optional[EstimateDiagnostics]]]:
    """Per-cell estimates (checker centered in each cell, scene otherwise intact),
    interpolated into a per-pixel unit-norm illuminant field."""
    estimates = np.zeros((sp.grid_rows, sp.grid_cols, 3))
    valid = np.zeros((sp.grid_rows, sp.grid_cols), dtype=bool)
    diags: list[Optional[EstimateDiagnostics]] = [None] * (sp.grid_rows * sp.grid_cols)

    for r, c, (x0, y0, cw, ch) in _cell_rects(img.width, img.height, sp):
        width = cfg.placement.checker_width
        if width is None or width > min(cw, ch):
            width = int(round(cfg.placement.width_fraction * min(cw, ch)))
        cell_placement = CheckerPlacement(
            center=(x0 + cw / 2, y0 + ch / 2), checker_width=width,
        )
        try:
            illum, diag = estimate_single(img, cfg, backend, placement=cell_placement)
        except (EstimationFailedError, TransportError):
            continue
        estimates[r, c] = illum.as_array()
        valid[r, c] = True
        diags[r * sp.grid_cols + c] = diag

    n_valid = int(valid.sum())
    if n_valid < min(4, sp.grid_rows * sp.grid_cols):
        raise EstimationFailedError(
            f"only {n_valid} of {sp.grid_rows * sp.grid_cols} grid cells produced estimates"
        )

    filled = _fill_invalid_cells(estimates, valid)
    return IlluminantMap(_interpolate_cells(filled, img.width, img.height, sp)), diags


def map_mae(pred: IlluminantMap, gt: IlluminantMap) -> float:
    """Mean angular error over pixels, in degrees."""
    if (pred.height, pred.width) != (gt.height, gt.width):
        raise InvalidInputError(
            f"map dims differ: {pred.height}x{pred.width} vs {gt.height}x{gt.width}"
        )
    return float(angular_errors_per_pixel(pred.data, gt.data).mean())


class TranscriptRecorder(BackendClient):
    """Record request-hash -> response-bytes pairs while delegating to a live client."""

    def __init__(self, inner: BackendClient, directory):
        self.inner = inner
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._index_path = self.directory / "index.json"
        self._index = (
            json.loads(self._index_path.read_text()) if self._index_path.exists() else {}
        )

    def call_raw(self, payload: bytes, timeout: float) -> bytes:
        key = hashlib.sha256(payload).hexdigest()
        response = self.inner.call_raw(payload, timeout)
        name = f"{key}.response.bin"
        (self.directory / name).write_bytes(response)
        request_name = f"{key}.request.bin"
        (self.directory / request_name).write_bytes(payload)
        self._index[key] = name
        self._index_path.write_text(json.dumps(self._index, sort_keys=True, indent=1))
        return response

    def close(self) -> None:
        self.inner.close()


class TranscriptReplayer(BackendClient):
    """Serve recorded responses; unknown requests fail as a transport error."""

    def __init__(self, directory):
        self.directory = Path(directory)
        index_path = self.directory / "index.json"
        if not index_path.exists():
            raise TransportError(f"no transcript index at {index_path}")
        self._index = json.loads(index_path.read_text())

    def call_raw(self, payload: bytes, timeout: float) -> bytes:
        key = hashlib.sha256(payload).hexdigest()
        if key not in self._index:
            raise TransportError(f"no recorded response for request {key[:12]}...")
        return (self.directory / self._index[key]).read_bytes()
