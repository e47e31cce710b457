"""Layered run configuration: JSON file -> flag overrides -> effective config.

Unknown keys are rejected at every level. The effective config is echoed
into every report together with its sha256 hash, so artifacts can be tied
back to the exact settings that produced them. Schema in docs/config.md.
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path
from typing import Any, Optional

from .errors import UsageError

DEFAULTS: dict[str, Any] = {
    "estimate": {
        "gamma": 2.2,
        "checker": {
            "border_ratio": 0.08,
            "sample_margin": 0.5,
            "width_fraction": 0.32,
        },
        "placement": {
            "mode": "centered",            # centered | explicit | bbox
            "center": None,                # [x, y] for explicit
            "checker_width": None,         # pixels, for explicit
        },
        "backend": {
            "endpoint": "mock",
            "timestep_mode": "fixed_T",
            "pyramid_levels": 2,
            "text_prompt": "a color calibration chart",
            "model_id": "mock",
            "ablation_laplacian": True,
            "timeout_s": 60.0,
        },
        "emit_debug": False,
    },
    "spatial": {
        "grid_rows": 4,
        "grid_cols": 4,
        "interpolation": "bilinear",
    },
    "jitter": {
        "brightness_range": [0.8, 2.0],
        "saturation_range": [0.8, 1.4],
        "contrast_range": [0.8, 1.4],
        "shuffle_order": False,
        "seed": None,
    },
    "augment_policy": {
        "p_crop": 0.7,
        "crop_scale_range": [0.7, 1.0],
        "p_color": 0.3,
        "rgb_rescale_range": [0.6, 1.4],
    },
    "baseline": {
        "method": "gray_world",
        "minkowski_p": 6.0,
        "smoothing_sigma": None,
        "saturation_threshold": 0.95,
    },
    "protocol": {
        "kind": "three_fold",
        "seed": 0,
        "folds": 3,
    },
    "oracle": {
        "illuminant": None,                # [r, g, b] or null for gray-world
        "structure_noise_sigma": 0.0,
    },
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise UsageError(f"unknown config key {where!r}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = copy.deepcopy(value)
    return out


class RunConfig:
    def __init__(self, effective: dict):
        self.effective = effective

    @classmethod
    def load(cls, config_path: Optional[str] = None,
             overrides: Optional[dict] = None) -> "RunConfig":
        effective = copy.deepcopy(DEFAULTS)
        if config_path:
            path = Path(config_path)
            try:
                file_obj = json.loads(path.read_text())
            except OSError as exc:
                raise UsageError(f"cannot read config {path}: {exc}") from exc
            except json.JSONDecodeError as exc:
                raise UsageError(f"config {path} is not valid JSON at position {exc.pos}") from exc
            if not isinstance(file_obj, dict):
                raise UsageError("config file must hold a JSON object")
            effective = _merge(effective, file_obj)
        if overrides:
            effective = _merge(effective, overrides)
        return cls(effective)

    def section(self, name: str) -> dict:
        return self.effective[name]

    def canonical_json(self) -> str:
        return json.dumps(self.effective, sort_keys=True)

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def echo(self) -> dict:
        return {"config": copy.deepcopy(self.effective), "config_hash": self.hash}
