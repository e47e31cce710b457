"""Wire protocol for inpainting backends.

Envelopes are JSON; images travel as base64 16-bit RGB PNG, masks as
base64 8-bit single-channel PNG (0 = keep, 255 = inpaint). Full schema in
docs/protocol.md. Unknown envelope fields are ignored for forward
compatibility; a version mismatch is a protocol error.
"""

from __future__ import annotations

import base64
import binascii
import json
from dataclasses import dataclass, field
from typing import Any, Optional

import cv2
import numpy as np

from .color import Mask, SrgbImage
from .errors import BackendFailure, DecodeError, ProtocolError

PROTOCOL_VERSION = 1

# Low zlib effort: payloads are transient and latency matters more than size.
_PNG_PARAMS = [cv2.IMWRITE_PNG_COMPRESSION, 1]

DEFAULT_TEXT_PROMPT = "a color calibration chart"


@dataclass(frozen=True)
class AblationConfig:
    laplacian: bool = True


@dataclass(frozen=True)
class BackendConfig:
    timestep_mode: str = "fixed_T"
    pyramid_levels: int = 2
    text_prompt: str = DEFAULT_TEXT_PROMPT
    model_id: str = "mock"
    ablation: AblationConfig = AblationConfig()

    def __post_init__(self):
        if self.pyramid_levels < 1:
            raise ProtocolError(f"pyramid_levels must be >= 1, got {self.pyramid_levels}")


@dataclass(frozen=True)
class BackendRequest:
    request_id: str
    image: SrgbImage
    mask: Mask
    config: BackendConfig = BackendConfig()
    protocol_version: int = PROTOCOL_VERSION

    def __post_init__(self):
        if not self.mask.matches(self.image):
            raise ProtocolError(
                f"mask {self.mask.height}x{self.mask.width} does not match "
                f"image {self.image.height}x{self.image.width}"
            )


@dataclass(frozen=True)
class BackendInfo:
    name: str
    model_id: str
    elapsed_ms: int = 0


@dataclass(frozen=True)
class BackendResponse:
    request_id: str
    image: SrgbImage
    backend_info: BackendInfo
    protocol_version: int = PROTOCOL_VERSION


def encode_image_png16(img: SrgbImage) -> bytes:
    u16 = np.round(img.data * 65535.0).astype(np.uint16)
    ok, buf = cv2.imencode(".png", u16[:, :, ::-1], _PNG_PARAMS)  # RGB -> BGR
    if not ok:  # pragma: no cover - cv2 png encoding of valid u16 cannot fail
        raise DecodeError("PNG encoding failed")
    return buf.tobytes()


def decode_image_png16(data: bytes) -> SrgbImage:
    arr = cv2.imdecode(np.frombuffer(data, np.uint8), cv2.IMREAD_UNCHANGED)
    if arr is None:
        raise DecodeError("image payload is not decodable PNG data")
    if arr.dtype != np.uint16 or arr.ndim != 3 or arr.shape[2] != 3:
        raise DecodeError(
            f"expected 16-bit 3-channel PNG, got dtype {arr.dtype} shape {arr.shape}"
        )
    return SrgbImage(arr[:, :, ::-1].astype(np.float64) / 65535.0)


def encode_mask_png(mask: Mask) -> bytes:
    ok, buf = cv2.imencode(".png", mask.data * np.uint8(255), _PNG_PARAMS)
    if not ok:  # pragma: no cover
        raise DecodeError("PNG encoding failed")
    return buf.tobytes()


def decode_mask_png(data: bytes) -> Mask:
    arr = cv2.imdecode(np.frombuffer(data, np.uint8), cv2.IMREAD_UNCHANGED)
    if arr is None:
        raise DecodeError("mask payload is not decodable PNG data")
    if arr.ndim != 2 or arr.dtype != np.uint8:
        raise DecodeError(f"expected 8-bit 1-channel PNG mask, got dtype {arr.dtype} shape {arr.shape}")
    return Mask((arr > 127).astype(np.uint8))


def _plane_to_json(width: int, height: int, encoding: str, png: bytes) -> dict:
    return {
        "width": width,
        "height": height,
        "encoding": encoding,
        "data": base64.b64encode(png).decode("ascii"),
    }


def _require(obj: dict, key: str, where: str) -> Any:
    if not isinstance(obj, dict):
        raise DecodeError(f"{where} must be a JSON object, got {type(obj).__name__}")
    if key not in obj:
        raise DecodeError(f"{where} is missing required field {key!r}")
    return obj[key]


def _decode_b64(field_obj: dict, where: str) -> bytes:
    data = _require(field_obj, "data", where)
    try:
        return base64.b64decode(data, validate=True)
    except (binascii.Error, TypeError, ValueError) as exc:
        raise DecodeError(f"{where}.data is not valid base64: {exc}") from exc


def _decode_image_field(field_obj: dict, where: str) -> SrgbImage:
    img = decode_image_png16(_decode_b64(field_obj, where))
    w, h = _require(field_obj, "width", where), _require(field_obj, "height", where)
    if (img.width, img.height) != (w, h):
        raise DecodeError(
            f"{where}: declared {w}x{h} but PNG decodes to {img.width}x{img.height}"
        )
    return img


def _decode_mask_field(field_obj: dict, where: str) -> Mask:
    mask = decode_mask_png(_decode_b64(field_obj, where))
    w, h = _require(field_obj, "width", where), _require(field_obj, "height", where)
    if (mask.width, mask.height) != (w, h):
        raise DecodeError(
            f"{where}: declared {w}x{h} but PNG decodes to {mask.width}x{mask.height}"
        )
    return mask


def _parse_json(payload: bytes, what: str) -> dict:
    try:
        obj = json.loads(payload.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise DecodeError(f"{what} is not UTF-8 at byte {exc.start}") from exc
    except json.JSONDecodeError as exc:
        raise DecodeError(f"{what} is not valid JSON at position {exc.pos}: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise DecodeError(f"{what} must be a JSON object")
    return obj


def _check_version(obj: dict, what: str) -> None:
    version = _require(obj, "protocol_version", what)
    if version != PROTOCOL_VERSION:
        raise ProtocolError(
            f"unsupported protocol_version {version!r}, this client speaks {PROTOCOL_VERSION}"
        )


def encode_request(req: BackendRequest) -> bytes:
    cfg = req.config
    envelope = {
        "protocol_version": req.protocol_version,
        "request_id": req.request_id,
        "image": _plane_to_json(req.image.width, req.image.height, "png16",
                                encode_image_png16(req.image)),
        "mask": _plane_to_json(req.mask.width, req.mask.height, "png8",
                               encode_mask_png(req.mask)),
        "config": {
            "timestep_mode": cfg.timestep_mode,
            "pyramid_levels": cfg.pyramid_levels,
            "text_prompt": cfg.text_prompt,
            "model_id": cfg.model_id,
            "ablation": {"laplacian": cfg.ablation.laplacian},
        },
    }
    return json.dumps(envelope, sort_keys=True).encode("utf-8")


def decode_request(payload: bytes) -> BackendRequest:
    obj = _parse_json(payload, "request envelope")
    _check_version(obj, "request envelope")
    cfg_obj = _require(obj, "config", "request envelope")
    ablation = cfg_obj.get("ablation", {})
    config = BackendConfig(
        timestep_mode=cfg_obj.get("timestep_mode", "fixed_T"),
        pyramid_levels=int(cfg_obj.get("pyramid_levels", 2)),
        text_prompt=cfg_obj.get("text_prompt", DEFAULT_TEXT_PROMPT),
        model_id=cfg_obj.get("model_id", "mock"),
        ablation=AblationConfig(laplacian=bool(ablation.get("laplacian", True))),
    )
    image = _decode_image_field(_require(obj, "image", "request envelope"), "image")
    mask = _decode_mask_field(_require(obj, "mask", "request envelope"), "mask")
    if (mask.height, mask.width) != (image.height, image.width):
        raise DecodeError(
            f"mask {mask.height}x{mask.width} does not match image "
            f"{image.height}x{image.width}"
        )
    return BackendRequest(
        request_id=str(_require(obj, "request_id", "request envelope")),
        image=image,
        mask=mask,
        config=config,
    )


def encode_response(resp: BackendResponse) -> bytes:
    info = resp.backend_info
    envelope = {
        "protocol_version": resp.protocol_version,
        "request_id": resp.request_id,
        "image": _plane_to_json(resp.image.width, resp.image.height, "png16",
                                encode_image_png16(resp.image)),
        "backend_info": {
            "name": info.name,
            "model_id": info.model_id,
            "elapsed_ms": info.elapsed_ms,
        },
    }
    return json.dumps(envelope, sort_keys=True).encode("utf-8")


def encode_error(request_id: Optional[str], code: str, message: str) -> bytes:
    envelope = {
        "protocol_version": PROTOCOL_VERSION,
        "request_id": request_id,
        "error": {"code": code, "message": message},
    }
    return json.dumps(envelope, sort_keys=True).encode("utf-8")


def decode_response(payload: bytes) -> BackendResponse:
    obj = _parse_json(payload, "response envelope")
    _check_version(obj, "response envelope")
    if "error" in obj:
        err = obj["error"] or {}
        raise BackendFailure(str(err.get("code", "unknown")), str(err.get("message", "")))
    info_obj = _require(obj, "backend_info", "response envelope")
    image = _decode_image_field(_require(obj, "image", "response envelope"), "image")
    return BackendResponse(
        request_id=str(_require(obj, "request_id", "response envelope")),
        image=image,
        backend_info=BackendInfo(
            name=str(_require(info_obj, "name", "backend_info")),
            model_id=str(_require(info_obj, "model_id", "backend_info")),
            elapsed_ms=int(info_obj.get("elapsed_ms", 0)),
        ),
    )


def validate_response(req: BackendRequest, resp: BackendResponse) -> None:
    """Client-side checks: id echo and dimensional agreement."""
    if resp.request_id != req.request_id:
        raise ProtocolError(
            f"response id {resp.request_id!r} does not echo request id {req.request_id!r}"
        )
    if (resp.image.height, resp.image.width) != (req.image.height, req.image.width):
        raise ProtocolError(
            f"response image {resp.image.height}x{resp.image.width} does not match "
            f"request {req.image.height}x{req.image.width}"
        )


def locality_deviation(req: BackendRequest, resp: BackendResponse) -> float:
    """Mean absolute deviation outside the mask, in [0, 1] units."""
    outside = ~req.mask.bool_array
    if not outside.any():
        return 0.0
    return float(np.abs(resp.image.data[outside] - req.image.data[outside]).mean())


# Compliant backends leave the mask complement untouched; latent-space
# backends may drift slightly, so violations warn rather than fail.
LOCALITY_WARN_THRESHOLD = 2.0 / 255.0
