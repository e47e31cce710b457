"""Dataset manifests, image ingestion, and checker-region masks.

The manifest schema (docs/manifest.md) is our own; converters for public
corpora live under scripts/ and are deliberately not core code. Images are
8- or 16-bit PNG/TIFF storing linear-raw values; dark levels are raw
counts at the file's bit depth.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import cv2
import numpy as np

from .color import LinearImage, Mask, SrgbImage
from .errors import DataError

SCHEMA_VERSION = 1

_ALLOWED_ENTRY_KEYS = {
    "image_id", "image_path", "camera_id", "gt_illuminant", "checker_bbox",
    "dark_level", "bit_depth", "width", "height", "tags",
}


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    image_path: Path
    camera_id: str
    gt_illuminant: tuple[float, float, float]
    checker_bbox: Optional[tuple[float, float, float, float]] = None
    dark_level: Optional[tuple[float, float, float]] = None
    bit_depth: Optional[int] = None
    width: Optional[int] = None
    height: Optional[int] = None
    tags: tuple[str, ...] = ()


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    entries: tuple[ManifestEntry, ...]
    source_path: Optional[Path] = None


def _fail(index, message: str):
    raise DataError(f"manifest entry {index}: {message}")


def _parse_entry(obj: dict, index: int, base_dir: Path) -> ManifestEntry:
    if not isinstance(obj, dict):
        _fail(index, "must be an object")
    unknown = set(obj) - _ALLOWED_ENTRY_KEYS
    if unknown:
        _fail(index, f"unknown keys {sorted(unknown)}")

    path_str = obj.get("image_path")
    if not isinstance(path_str, str) or not path_str:
        _fail(index, "image_path is required")
    image_path = Path(path_str)
    if not image_path.is_absolute():
        image_path = base_dir / image_path

    gt = obj.get("gt_illuminant")
    if (not isinstance(gt, (list, tuple)) or len(gt) != 3
            or not all(isinstance(v, (int, float)) and math.isfinite(v) and v > 0 for v in gt)):
        _fail(index, f"gt_illuminant must be three positive numbers, got {gt!r}")

    bbox = obj.get("checker_bbox")
    if bbox is not None:
        if (not isinstance(bbox, (list, tuple)) or len(bbox) != 4
                or not all(isinstance(v, (int, float)) for v in bbox)):
            _fail(index, f"checker_bbox must be [x0, y0, x1, y1], got {bbox!r}")
        x0, y0, x1, y1 = bbox
        if not (0 <= x0 < x1 and 0 <= y0 < y1):
            _fail(index, f"checker_bbox {bbox!r} is not a valid rectangle")
        width, height = obj.get("width"), obj.get("height")
        if width is not None and x1 > width:
            _fail(index, f"checker_bbox {bbox!r} exceeds declared width {width}")
        if height is not None and y1 > height:
            _fail(index, f"checker_bbox {bbox!r} exceeds declared height {height}")

    dark = obj.get("dark_level")
    if dark is not None:
        if isinstance(dark, (int, float)):
            dark = (float(dark),) * 3
        elif isinstance(dark, (list, tuple)) and len(dark) == 3:
            dark = tuple(float(v) for v in dark)
        else:
            _fail(index, f"dark_level must be a number or three numbers, got {dark!r}")
        if any(v < 0 for v in dark):
            _fail(index, "dark_level must be non-negative")

    bit_depth = obj.get("bit_depth")
    if bit_depth is not None and bit_depth not in (8, 16):
        _fail(index, f"bit_depth must be 8 or 16, got {bit_depth!r}")

    return ManifestEntry(
        image_id=str(obj.get("image_id") or Path(path_str).stem),
        image_path=image_path,
        camera_id=str(obj.get("camera_id", "unknown")),
        gt_illuminant=tuple(float(v) for v in gt),
        checker_bbox=tuple(float(v) for v in bbox) if bbox is not None else None,
        dark_level=dark,
        bit_depth=bit_depth,
        width=obj.get("width"),
        height=obj.get("height"),
        tags=tuple(str(t) for t in obj.get("tags", ())),
    )


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"manifest {path} is not valid JSON at position {exc.pos}") from exc

    if not isinstance(obj, dict):
        raise DataError("manifest must be a JSON object")
    if obj.get("schema_version") != SCHEMA_VERSION:
        raise DataError(
            f"manifest schema_version {obj.get('schema_version')!r} unsupported "
            f"(expected {SCHEMA_VERSION})"
        )
    entries_obj = obj.get("entries")
    if not isinstance(entries_obj, list):
        raise DataError("manifest entries must be a list")

    entries = [_parse_entry(e, i, path.parent) for i, e in enumerate(entries_obj)]
    seen: dict[str, int] = {}
    for i, e in enumerate(entries):
        if e.image_id in seen:
            raise DataError(
                f"duplicate image id {e.image_id!r} at entries {seen[e.image_id]} and {i}"
            )
        seen[e.image_id] = i
    return DatasetManifest(
        name=str(obj.get("name", path.stem)),
        entries=tuple(entries),
        source_path=path,
    )


def save_manifest(manifest: DatasetManifest, path) -> None:
    path = Path(path)
    entries = []
    for e in manifest.entries:
        image_path = e.image_path
        try:
            image_path = image_path.relative_to(path.parent)
        except ValueError:
            pass
        row: dict = {
            "image_id": e.image_id,
            "image_path": str(image_path),
            "camera_id": e.camera_id,
            "gt_illuminant": list(e.gt_illuminant),
        }
        if e.checker_bbox is not None:
            row["checker_bbox"] = list(e.checker_bbox)
        if e.dark_level is not None:
            row["dark_level"] = list(e.dark_level)
        for key in ("bit_depth", "width", "height"):
            value = getattr(e, key)
            if value is not None:
                row[key] = value
        if e.tags:
            row["tags"] = list(e.tags)
        entries.append(row)
    path.write_text(json.dumps(
        {"schema_version": SCHEMA_VERSION, "name": manifest.name, "entries": entries},
        indent=1, sort_keys=True,
    ) + "\n")


def load_image_file(path, dark_level: Optional[Sequence[float]] = None,
                    expect_bit_depth: Optional[int] = None) -> LinearImage:
    """Read an 8/16-bit PNG/TIFF, scale by bit depth, subtract dark counts."""
    arr = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if arr is None:
        raise DataError(f"cannot read image {path}")
    if arr.ndim != 3 or arr.shape[2] < 3:
        raise DataError(f"{path}: expected a 3-channel image, got shape {arr.shape}")
    arr = arr[:, :, :3][:, :, ::-1]  # BGR -> RGB, drop alpha

    if arr.dtype == np.uint16:
        depth, scale = 16, 65535.0
    elif arr.dtype == np.uint8:
        depth, scale = 8, 255.0
    else:
        raise DataError(f"{path}: unsupported dtype {arr.dtype}")
    if expect_bit_depth is not None and expect_bit_depth != depth:
        raise DataError(
            f"{path}: manifest declares {expect_bit_depth}-bit but file is {depth}-bit"
        )

    data = arr.astype(np.float64) / scale
    if dark_level is not None:
        data = np.maximum(data - np.asarray(dark_level, dtype=np.float64) / scale, 0.0)
    return LinearImage(data)


def load_image_linear(entry: ManifestEntry) -> LinearImage:
    return load_image_file(entry.image_path, entry.dark_level, entry.bit_depth)


def save_image_png16(path, img: Union[LinearImage, SrgbImage]) -> None:
    """Write a 16-bit PNG; linear inputs are clipped to [0, 1] first."""
    u16 = np.round(np.clip(img.data, 0.0, 1.0) * 65535.0).astype(np.uint16)
    if not cv2.imwrite(str(path), u16[:, :, ::-1]):
        raise DataError(f"cannot write image {path}")


def save_image_png8(path, img: Union[LinearImage, SrgbImage]) -> None:
    u8 = np.round(np.clip(img.data, 0.0, 1.0) * 255.0).astype(np.uint8)
    if not cv2.imwrite(str(path), u8[:, :, ::-1]):
        raise DataError(f"cannot write image {path}")


def mask_checker_for_training(img: LinearImage,
                              bbox: Optional[Sequence[float]],
                              margin: float = 0.05) -> Mask:
    """Rectangular mask over the bbox dilated by margin * bbox diagonal."""
    if bbox is None:
        raise DataError("entry has no checker_bbox to mask")
    x0, y0, x1, y1 = (float(v) for v in bbox)
    pad = margin * math.hypot(x1 - x0, y1 - y0)
    ix0 = max(0, int(math.floor(x0 - pad)))
    iy0 = max(0, int(math.floor(y0 - pad)))
    ix1 = min(img.width, int(math.ceil(x1 + pad)))
    iy1 = min(img.height, int(math.ceil(y1 + pad)))
    mask = np.zeros((img.height, img.width), dtype=np.uint8)
    mask[iy0:iy1, ix0:ix1] = 1
    return Mask(mask)
