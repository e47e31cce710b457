"""Checker geometry, neutral-checker rendering/compositing, and patch statistics.

The 24-patch grid is 4 rows x 6 columns; the bottom row is the achromatic
series whose observed color under an illuminant is proportional to the
illuminant itself. Geometry is axis-aligned (detection and homography
alignment are out of scope; datasets provide bounding boxes).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from typing import Sequence, Union

import numpy as np

from .color import Illuminant, LinearImage, Mask, SrgbImage, mean_illuminant
from .errors import EstimationFailedError, InvalidInputError, PlacementError, SamplingError

TEMPLATE_VERSION = "v1"

# Clip/noise-floor rule for achromatic patches, in linear (gamma-decoded) terms.
CLIP_LEVEL = 0.98
NOISE_FLOOR = 0.02

DEFAULT_WIDTH_FRACTION = 0.32


def load_template(name: str = f"checker_template_{TEMPLATE_VERSION}.txt") -> tuple[tuple[float, float, float], ...]:
    text = resources.files("illumchart.data").joinpath(name).read_text()
    colors = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        r, g, b = (float(tok) for tok in line.split())
        colors.append((r, g, b))
    if len(colors) != 24:
        raise InvalidInputError(f"template {name} has {len(colors)} entries, expected 24")
    return tuple(colors)


_DEFAULT_TEMPLATE = load_template()


@dataclass(frozen=True)
class CheckerLayout:
    rows: int = 4
    cols: int = 6
    patch_colors: tuple[tuple[float, float, float], ...] = _DEFAULT_TEMPLATE
    achromatic_indices: tuple[int, ...] = (18, 19, 20, 21, 22, 23)
    border_ratio: float = 0.08
    sample_margin: float = 0.5

    def __post_init__(self):
        if len(self.patch_colors) != self.rows * self.cols:
            raise InvalidInputError(
                f"{len(self.patch_colors)} patch colors for a {self.rows}x{self.cols} grid"
            )
        for idx in self.achromatic_indices:
            r, g, b = self.patch_colors[idx]
            if not (r == g == b):
                raise InvalidInputError(f"achromatic patch {idx} is not neutral: {(r, g, b)}")
        if not (0.0 < self.sample_margin <= 1.0):
            raise InvalidInputError(f"sample_margin must be in (0, 1], got {self.sample_margin}")
        if not (0.0 <= self.border_ratio < 1.0):
            raise InvalidInputError(f"border_ratio must be in [0, 1), got {self.border_ratio}")


@dataclass(frozen=True)
class CheckerPlacement:
    """Axis-aligned placement: center in pixels, width in pixels, 6:4 aspect."""

    center: tuple[float, float]
    checker_width: int

    def __post_init__(self):
        if self.checker_width < 6:
            raise InvalidInputError(f"checker_width {self.checker_width} too small to render")

    def rect(self, layout: CheckerLayout = CheckerLayout()) -> tuple[int, int, int, int]:
        """Integer (x0, y0, width, height) of the placement rectangle."""
        w = int(self.checker_width)
        h = int(round(w * layout.rows / layout.cols))
        x0 = int(round(self.center[0] - w / 2))
        y0 = int(round(self.center[1] - h / 2))
        return x0, y0, w, h


@dataclass(frozen=True)
class PatchSample:
    patch_index: int
    mean_rgb: tuple[float, float, float]
    median_rgb: tuple[float, float, float]
    pixel_count: int

    def __post_init__(self):
        if self.pixel_count <= 0:
            raise InvalidInputError("patch sample must cover at least one pixel")


def centered_placement(width: int, height: int,
                       width_fraction: float = DEFAULT_WIDTH_FRACTION) -> CheckerPlacement:
    """Default in-the-wild placement: centered, sized from the short image side."""
    return CheckerPlacement(
        center=(width / 2, height / 2),
        checker_width=int(round(width_fraction * min(width, height))),
    )


def placement_from_bbox(bbox: Sequence[float], layout: CheckerLayout = CheckerLayout()) -> CheckerPlacement:
    """Largest 6:4 placement that fits inside an (x0, y0, x1, y1) box."""
    x0, y0, x1, y1 = (float(v) for v in bbox)
    if x1 <= x0 or y1 <= y0:
        raise InvalidInputError(f"degenerate bbox {bbox}")
    bw, bh = x1 - x0, y1 - y0
    width = min(bw, bh * layout.cols / layout.rows)
    return CheckerPlacement(center=((x0 + x1) / 2, (y0 + y1) / 2), checker_width=int(width))


def _check_rect_inside(rect: tuple[int, int, int, int], width: int, height: int) -> None:
    x0, y0, w, h = rect
    if x0 < 0 or y0 < 0 or x0 + w > width or y0 + h > height:
        raise PlacementError(
            f"placement rect x={x0}..{x0 + w} y={y0}..{y0 + h} "
            f"outside {width}x{height} image"
        )


def _separator_lookup(n_pixels: int, n_cells: int, border_ratio: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel cell index and separator flag along one axis."""
    frac = (np.arange(n_pixels) + 0.5) * n_cells / n_pixels
    cell = np.minimum(frac.astype(np.intp), n_cells - 1)
    within = frac - cell
    half = border_ratio / 2
    return cell, (within < half) | (within > 1 - half)


def render_neutral_checker(layout: CheckerLayout,
                           placement: CheckerPlacement) -> tuple[SrgbImage, Mask]:
    """Rasterize the template at the placement size.

    Returns the checker raster (template colors with black separators) and
    the mask over the raster rectangle; the mask covers the full rectangle,
    separators included.
    """
    _, _, w, h = placement.rect(layout)
    col, sep_x = _separator_lookup(w, layout.cols, layout.border_ratio)
    row, sep_y = _separator_lookup(h, layout.rows, layout.border_ratio)

    palette = np.asarray(layout.patch_colors, dtype=np.float64)
    idx = row[:, None] * layout.cols + col[None, :]
    raster = palette[idx]
    raster[sep_y[:, None] | sep_x[None, :]] = 0.0
    return SrgbImage(raster), Mask(np.ones((h, w), dtype=np.uint8))


def composite_checker(img: SrgbImage, layout: CheckerLayout,
                      placement: CheckerPlacement) -> tuple[SrgbImage, Mask]:
    """Paste the rendered neutral checker; pixels outside the rect are untouched."""
    rect = placement.rect(layout)
    _check_rect_inside(rect, img.width, img.height)
    raster, _ = render_neutral_checker(layout, placement)
    x0, y0, w, h = rect

    out = img.data.copy()
    out[y0:y0 + h, x0:x0 + w] = raster.data
    mask = np.zeros((img.height, img.width), dtype=np.uint8)
    mask[y0:y0 + h, x0:x0 + w] = 1
    return SrgbImage(out), Mask(mask)


ImageLike = Union[LinearImage, SrgbImage]


def sample_patches(img: ImageLike, layout: CheckerLayout,
                   placement: CheckerPlacement) -> list[PatchSample]:
    """Mean/median color of the central sample_margin fraction of every patch cell."""
    rect = placement.rect(layout)
    _check_rect_inside(rect, img.width, img.height)
    x0, y0, w, h = rect

    cell_w = w / layout.cols
    cell_h = h / layout.rows
    half_w = cell_w * layout.sample_margin / 2
    half_h = cell_h * layout.sample_margin / 2

    samples = []
    for r in range(layout.rows):
        cy = y0 + (r + 0.5) * cell_h
        iy0, iy1 = int(round(cy - half_h)), int(round(cy + half_h))
        for c in range(layout.cols):
            cx = x0 + (c + 0.5) * cell_w
            ix0, ix1 = int(round(cx - half_w)), int(round(cx + half_w))
            region = img.data[iy0:iy1, ix0:ix1].reshape(-1, 3)
            if region.shape[0] == 0:
                raise SamplingError(
                    f"patch ({r}, {c}) sample region is empty; checker too small "
                    f"(cell {cell_w:.1f}x{cell_h:.1f}px, margin {layout.sample_margin})"
                )
            n = region.shape[0]
            # Shifted compensated mean: exact on constant patches.
            mean_rgb = tuple(
                float(region[0, ch]) + math.fsum(region[:, ch] - region[0, ch]) / n
                for ch in range(3)
            )
            samples.append(PatchSample(
                patch_index=r * layout.cols + c,
                mean_rgb=mean_rgb,
                median_rgb=tuple(float(v) for v in np.median(region, axis=0)),
                pixel_count=n,
            ))
    return samples


def estimate_illuminant_from_patches(samples: Sequence[PatchSample],
                                     layout: CheckerLayout,
                                     clip_level: float = CLIP_LEVEL,
                                     noise_floor: float = NOISE_FLOOR) -> Illuminant:
    """Average the unit chromaticities of usable achromatic patch medians.

    A patch is discarded when any channel median reaches the clip level
    (blown highlights carry no chromaticity) or falls to the noise floor.
    """
    by_index = {s.patch_index: s for s in samples}
    chromas = []
    for idx in layout.achromatic_indices:
        if idx not in by_index:
            raise InvalidInputError(f"achromatic patch {idx} missing from samples")
        med = np.asarray(by_index[idx].median_rgb, dtype=np.float64)
        if (med >= clip_level).any() or (med <= noise_floor).any():
            continue
        chromas.append(med)
    if not chromas:
        raise EstimationFailedError(
            "every achromatic patch was clipped or under the noise floor"
        )
    return mean_illuminant(chromas)
