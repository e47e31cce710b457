"""In-process oracle backend: tints the composited checker by a known illuminant.

Used as the test double for the whole pipeline. Inside the mask each pixel
is multiplied, in the linear domain, by the green-anchored oracle
chromaticity, then re-encoded; outside the mask the request image passes
through bitwise. Responses are bit-identical for identical requests
(noise, when enabled, is seeded from the request content).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .baselines import BaselineConfig, BaselineMethod, estimate_baseline
from .color import Illuminant, Mask, SrgbImage, gamma_decode
from .errors import InvalidInputError
from .protocol import BackendInfo, BackendRequest, BackendResponse, encode_request

GRAY_WORLD_ORACLE = "from_scene_gray_world"

GAMMA = 2.2


@dataclass(frozen=True)
class SplitOracle:
    """Two-illuminant oracle: picked by the mask centroid's x position."""

    left: Illuminant
    right: Illuminant
    x_boundary: float = 0.5


@dataclass(frozen=True)
class OracleConfig:
    oracle: Union[Illuminant, str] = GRAY_WORLD_ORACLE
    structure_noise_sigma: float = 0.0
    split: Optional[SplitOracle] = None

    def __post_init__(self):
        if self.structure_noise_sigma < 0:
            raise InvalidInputError("structure_noise_sigma must be >= 0")
        if isinstance(self.oracle, str) and self.oracle != GRAY_WORLD_ORACLE:
            raise InvalidInputError(f"unknown oracle spec {self.oracle!r}")


def _resolve_oracle(req: BackendRequest, cfg: OracleConfig) -> Illuminant:
    masked = req.mask.bool_array
    if cfg.split is not None:
        xs = np.nonzero(masked)[1]
        centroid_x = float(xs.mean()) if xs.size else req.image.width / 2
        boundary = cfg.split.x_boundary * req.image.width
        return cfg.split.left if centroid_x < boundary else cfg.split.right
    if isinstance(cfg.oracle, Illuminant):
        return cfg.oracle
    # Gray-world over the scene pixels the checker did not cover.
    linear = gamma_decode(req.image, GAMMA)
    return estimate_baseline(
        linear,
        BaselineConfig(method=BaselineMethod.GRAY_WORLD),
        exclude=Mask(masked.astype(np.uint8)),
    )


def mock_inpaint(req: BackendRequest, cfg: OracleConfig) -> BackendResponse:
    oracle = _resolve_oracle(req, cfg)
    gains = oracle.green_anchored()

    out = req.image.data.copy()
    masked = req.mask.bool_array

    # Work on the masked pixels only; the complement stays bitwise untouched.
    sub = out[masked]
    tinted = np.power(np.clip(np.power(sub, GAMMA) * gains, 0.0, 1.0), 1.0 / GAMMA)

    if cfg.structure_noise_sigma > 0:
        seed = int.from_bytes(hashlib.sha256(encode_request(req)).digest()[:8], "big")
        rng = np.random.Generator(np.random.PCG64(seed))
        tinted = np.clip(
            tinted + rng.normal(0.0, cfg.structure_noise_sigma, tinted.shape), 0.0, 1.0,
        )

    # Quantize the edited region so in-process responses match a wire round trip.
    out[masked] = np.round(tinted * 65535.0) / 65535.0
    return BackendResponse(
        request_id=req.request_id,
        image=SrgbImage(out),
        backend_info=BackendInfo(name="mock", model_id=req.config.model_id, elapsed_ms=0),
    )
