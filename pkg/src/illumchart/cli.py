"""Command-line entry point.

Exit codes: 0 ok, 1 usage, 2 data error, 3 backend error, 4 estimation
failure. Machine-readable outputs embed the effective config hash; see
docs/config.md and docs/reports.md for schemas.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import tensorfile
from .augment import JitterConfig, make_rng, sample_jitter_factors, apply_color_jitter
from .baselines import BaselineConfig, estimate_baseline
from .checker import CheckerLayout
from .color import (
    Illuminant,
    LinearImage,
    Mask,
    SrgbImage,
    angular_error,
    apply_white_balance,
    gamma_encode,
    normalize_illuminant,
)
from .dataset import (
    load_image_file,
    load_manifest,
    mask_checker_for_training,
    save_image_png16,
)
from .engine import (
    EstimateConfig,
    IlluminantMap,
    PlacementPolicy,
    SpatialConfig,
    estimate_single,
    estimate_spatial,
    map_mae,
    resolve_placement,
)
from .errors import (
    BackendFailure,
    DataError,
    EstimationFailedError,
    IllumchartError,
    InvalidInputError,
    PlacementError,
    ProtocolError,
    SamplingError,
    TransportError,
    UsageError,
)
from .evaluate import ProtocolSpec, emit_report, results_to_csv, run_protocol
from .mock_backend import GRAY_WORLD_ORACLE, OracleConfig
from .protocol import AblationConfig, BackendConfig
from .pyramid import PyramidConfig, high_freq_extract
from .runconfig import RunConfig
from .transport import BackendClient, make_handler, open_backend, serve_http, serve_stdio

logger = logging.getLogger(__name__)

PROTOCOL_ALIASES = {
    "cross": "cross_dataset",
    "loo": "leave_one_out_camera",
    "3fold": "three_fold",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parse_triple(text: str, what: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise UsageError(f"{what} must be three comma-separated numbers, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise UsageError(f"{what}: {exc}") from exc


def _parse_pair(text: str, what: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise UsageError(f"{what} must be two comma-separated numbers, got {text!r}")
    return float(parts[0]), float(parts[1])


def _parse_grid(text: str, what: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise UsageError(f"{what} must look like ROWSxCOLS, got {text!r}")
    try:
        return int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise UsageError(f"{what}: {exc}") from exc


def _parse_oracle(text: Optional[str]) -> OracleConfig:
    if text is None or text == "gray-world":
        return OracleConfig(oracle=GRAY_WORLD_ORACLE)
    return OracleConfig(oracle=normalize_illuminant(_parse_triple(text, "--oracle")))


def _layout_from_config(cfg: RunConfig) -> CheckerLayout:
    checker = cfg.section("estimate")["checker"]
    return CheckerLayout(
        border_ratio=checker["border_ratio"],
        sample_margin=checker["sample_margin"],
    )


def _estimate_config(cfg: RunConfig, args) -> EstimateConfig:
    est = cfg.section("estimate")
    placement = est["placement"]
    mode = placement["mode"]
    center = placement["center"]
    width = placement["checker_width"]
    if getattr(args, "bbox", None):
        mode = "bbox"
    if getattr(args, "center", None):
        center = _parse_pair(args.center, "--center")
        mode = "explicit"
    if getattr(args, "checker_width", None):
        width = args.checker_width
        if mode != "bbox":
            mode = "explicit" if center is not None else mode
    backend = est["backend"]
    return EstimateConfig(
        gamma=est["gamma"],
        layout=_layout_from_config(cfg),
        placement=PlacementPolicy(
            mode=mode,
            center=tuple(center) if center is not None else None,
            checker_width=width,
            width_fraction=est["checker"]["width_fraction"],
            bbox=_parse_bbox(args.bbox) if getattr(args, "bbox", None) else None,
        ),
        backend_config=BackendConfig(
            timestep_mode=backend["timestep_mode"],
            pyramid_levels=backend["pyramid_levels"],
            text_prompt=backend["text_prompt"],
            model_id=backend["model_id"],
            ablation=AblationConfig(laplacian=backend["ablation_laplacian"]),
        ),
        emit_debug=bool(getattr(args, "debug_dir", None)),
    )


def _parse_bbox(text: str) -> tuple[float, float, float, float]:
    parts = text.split(",")
    if len(parts) != 4:
        raise UsageError(f"--bbox must be x0,y0,x1,y1, got {text!r}")
    return tuple(float(p) for p in parts)


def _open_client(cfg: RunConfig, args) -> BackendClient:
    endpoint = getattr(args, "backend", None) or cfg.section("estimate")["backend"]["endpoint"]
    oracle_cfg = cfg.section("oracle")
    oracle_text = getattr(args, "oracle", None)
    if oracle_text is None and oracle_cfg["illuminant"] is not None:
        oracle_text = ",".join(str(v) for v in oracle_cfg["illuminant"])
    oracle = _parse_oracle(oracle_text)
    sigma = getattr(args, "noise_sigma", None)
    if sigma is None:
        sigma = oracle_cfg["structure_noise_sigma"]
    if sigma:
        oracle = OracleConfig(oracle=oracle.oracle, structure_noise_sigma=sigma)
    return open_backend(endpoint, oracle)


def _write_json(path: Optional[str], payload: dict) -> None:
    text = json.dumps(payload, sort_keys=True, indent=1) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        print(text, end="")


# ---------------------------------------------------------------- estimate

def _sweep_positions(width: int, height: int, checker_w: int, checker_h: int,
                     rows: int, cols: int) -> list[tuple[float, float]]:
    xs = [checker_w / 2 + (j + 0.5) * (width - checker_w) / cols for j in range(cols)]
    ys = [checker_h / 2 + (i + 0.5) * (height - checker_h) / rows for i in range(rows)]
    return [(x, y) for y in ys for x in xs]


def cmd_estimate(args) -> int:
    cfg = RunConfig.load(args.config)
    est_cfg = _estimate_config(cfg, args)
    img = load_image_file(args.image)
    gt = normalize_illuminant(_parse_triple(args.gt, "--gt")) if args.gt else None

    with _open_client(cfg, args) as client:
        illum, diag = estimate_single(img, est_cfg, client)

        sweep_rows = []
        if args.sweep:
            n_rows, n_cols = _parse_grid(args.sweep, "--sweep")
            base = resolve_placement(est_cfg.placement, img.width, img.height, est_cfg.layout)
            _, _, w, h = base.rect(est_cfg.layout)
            from .checker import CheckerPlacement

            for i, center in enumerate(
                    _sweep_positions(img.width, img.height, w, h, n_rows, n_cols)):
                sweep_illum, _ = estimate_single(
                    img, est_cfg, client,
                    placement=CheckerPlacement(center=center, checker_width=w),
                )
                row = {
                    "placement_index": i,
                    "center_x": center[0],
                    "center_y": center[1],
                    "est": (sweep_illum.r, sweep_illum.g, sweep_illum.b),
                }
                if gt:
                    row["error_deg"] = angular_error(sweep_illum, gt)
                sweep_rows.append(row)

    payload = {
        "illuminant": [illum.r, illum.g, illum.b],
        "diagnostics": diag.canonical_dict(),
        **cfg.echo(),
    }
    if gt:
        payload["gt"] = [gt.r, gt.g, gt.b]
        payload["angular_error_deg"] = angular_error(illum, gt)
    _write_json(args.json, payload)

    if args.sweep and args.sweep_out:
        header = "placement_index,center_x,center_y,est_r,est_g,est_b"
        if gt:
            header += ",gt_r,gt_g,gt_b,error_deg"
        lines = [f"# config_hash={cfg.hash}", header]
        for row in sweep_rows:
            line = (f"{row['placement_index']},{row['center_x']:.3f},{row['center_y']:.3f},"
                    f"{row['est'][0]:.9f},{row['est'][1]:.9f},{row['est'][2]:.9f}")
            if gt:
                line += f",{gt.r:.9f},{gt.g:.9f},{gt.b:.9f},{row['error_deg']:.9f}"
            lines.append(line)
        Path(args.sweep_out).write_text("\n".join(lines) + "\n")

    if args.wb_out:
        balanced = apply_white_balance(img, illum)
        save_image_png16(args.wb_out, gamma_encode(balanced, est_cfg.gamma))
        Path(str(args.wb_out) + ".meta.json").write_text(
            json.dumps(cfg.echo(), sort_keys=True) + "\n")

    if args.debug_dir and diag.debug_images:
        debug = Path(args.debug_dir)
        debug.mkdir(parents=True, exist_ok=True)
        save_image_png16(debug / "composited.png", diag.debug_images["composited"])
        save_image_png16(debug / "backend_output.png", diag.debug_images["backend_output"])
    return 0


# ---------------------------------------------------------------- spatial

def _chromaticity_png(map_: IlluminantMap, path: str) -> None:
    viz = map_.data / map_.data.max(axis=-1, keepdims=True)
    save_image_png16(path, SrgbImage(np.clip(viz, 0.0, 1.0)))


def _load_map(path: str, expect_hw: tuple[int, int]) -> IlluminantMap:
    data, _ = tensorfile.read_tensor(path)
    if data.shape[2] != 3:
        raise DataError(f"{path}: illuminant map must have 3 channels, got {data.shape[2]}")
    if data.shape[:2] != expect_hw:
        raise DataError(f"{path}: map shape {data.shape[:2]} does not match image {expect_hw}")
    arr = data.astype(np.float64)
    norms = np.linalg.norm(arr, axis=-1, keepdims=True)
    if (norms == 0).any():
        raise DataError(f"{path}: map contains zero vectors")
    return IlluminantMap(arr / norms)


def cmd_spatial(args) -> int:
    cfg = RunConfig.load(args.config)
    est_cfg = _estimate_config(cfg, args)
    spatial = cfg.section("spatial")
    rows, cols = (spatial["grid_rows"], spatial["grid_cols"])
    if args.grid:
        rows, cols = _parse_grid(args.grid, "--grid")
    sp = SpatialConfig(grid_rows=rows, grid_cols=cols,
                       interpolation=spatial["interpolation"])

    img = load_image_file(args.image)
    with _open_client(cfg, args) as client:
        map_, _diags = estimate_spatial(img, est_cfg, sp, client)

    payload = {"grid": [rows, cols], **cfg.echo()}
    if args.map_out:
        tensorfile.write_tensor(args.map_out, map_.data.astype(np.float32))
        payload["map_out"] = str(args.map_out)
    if args.map_png:
        _chromaticity_png(map_, args.map_png)
    if args.gt_map:
        gt_map = _load_map(args.gt_map, (img.height, img.width))
        payload["map_mae_deg"] = map_mae(map_, gt_map)
    _write_json(args.json, payload)
    return 0


# ------------------------------------------------------------ whitebalance

def cmd_whitebalance(args) -> int:
    img = load_image_file(args.image)
    illum = normalize_illuminant(_parse_triple(args.illum, "--illum"))
    balanced = apply_white_balance(img, illum)
    save_image_png16(args.out, gamma_encode(balanced, args.gamma))
    return 0


# ---------------------------------------------------------------- baseline

def _baseline_config(cfg: RunConfig, args) -> BaselineConfig:
    section = dict(cfg.section("baseline"))
    if args.method:
        section["method"] = args.method
    if args.p is not None:
        section["minkowski_p"] = args.p
    if args.sigma is not None:
        section["smoothing_sigma"] = args.sigma
    return BaselineConfig(
        method=section["method"],
        minkowski_p=section["minkowski_p"],
        smoothing_sigma=section["smoothing_sigma"],
        saturation_threshold=section["saturation_threshold"],
    )


def make_baseline_estimator(bcfg: BaselineConfig, mask_physical_checker: bool = True):
    def estimator(img: LinearImage, entry):
        exclude = None
        if mask_physical_checker and entry.checker_bbox is not None:
            exclude = mask_checker_for_training(img, entry.checker_bbox, margin=0.0)
        return estimate_baseline(img, bcfg, exclude=exclude), 0

    return estimator


def make_engine_estimator(est_cfg: EstimateConfig, client: BackendClient):
    def estimator(img: LinearImage, entry):
        if entry.checker_bbox is not None:
            policy = PlacementPolicy(mode="bbox")
        else:
            policy = est_cfg.placement
        cfg = EstimateConfig(
            gamma=est_cfg.gamma, layout=est_cfg.layout, placement=policy,
            backend_config=est_cfg.backend_config, emit_debug=False,
        )
        illum, diag = estimate_single(img, cfg, client, bbox=entry.checker_bbox)
        return illum, diag.backend_elapsed_ms

    return estimator


def cmd_baseline(args) -> int:
    cfg = RunConfig.load(args.config)
    bcfg = _baseline_config(cfg, args)
    manifest = load_manifest(args.manifest)
    spec = ProtocolSpec(kind="cross_dataset", seed=0)
    stats, results = run_protocol(
        spec, make_baseline_estimator(bcfg, not args.no_mask_checker), manifest,
        jobs=args.jobs,
    )
    csv_text = f"# config_hash={cfg.hash}\n" + results_to_csv(results)
    Path(args.out).write_text(csv_text)
    print(json.dumps({"stats": stats.to_dict(), "method": bcfg.method.value,
                      "config_hash": cfg.hash}, sort_keys=True, indent=1))
    return 0


# ---------------------------------------------------------------- evaluate

def cmd_evaluate(args) -> int:
    cfg = RunConfig.load(args.config)
    kind = PROTOCOL_ALIASES.get(args.protocol, args.protocol)
    section = cfg.section("protocol")
    spec = ProtocolSpec(
        kind=kind,
        seed=args.seed if args.seed is not None else section["seed"],
        folds=section["folds"],
    )
    manifest = load_manifest(args.manifest)
    test_manifest = load_manifest(args.test_manifest) if args.test_manifest else None

    client = None
    if args.estimator.startswith("baseline:"):
        bcfg = BaselineConfig(method=args.estimator.split(":", 1)[1],
                              **{k: v for k, v in cfg.section("baseline").items()
                                 if k != "method"})
        estimator = make_baseline_estimator(bcfg)
    elif args.estimator == "mock" or args.estimator.startswith("backend:"):
        endpoint = "mock" if args.estimator == "mock" else args.estimator.split(":", 1)[1]
        oracle = _parse_oracle(args.oracle)
        client = open_backend(endpoint, oracle)
        estimator = make_engine_estimator(_estimate_config(cfg, args), client)
    else:
        raise UsageError(
            f"--estimator must be baseline:NAME, mock, or backend:ENDPOINT, got {args.estimator!r}"
        )

    try:
        stats, results = run_protocol(spec, estimator, manifest,
                                      test_manifest=test_manifest, jobs=args.jobs)
    finally:
        if client is not None:
            client.close()

    paths = emit_report(stats, results, args.out_dir, config_echo=cfg.echo(),
                        seed=spec.seed, extra={"protocol": spec.kind,
                                               "estimator": args.estimator})
    print(json.dumps({"stats": stats.to_dict(), "report": str(paths["report"]),
                      "csv": str(paths["csv"])}, sort_keys=True, indent=1))
    return 0


# ----------------------------------------------------------------- augment

def _load_mask_file(path: str) -> Mask:
    import cv2

    arr = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if arr is None:
        raise DataError(f"cannot read mask {path}")
    if arr.ndim == 3:
        arr = arr.max(axis=-1)
    return Mask((arr > 0).astype(np.uint8))


def cmd_augment(args) -> int:
    cfg = RunConfig.load(args.config)
    section = cfg.section("jitter")
    jcfg = JitterConfig(
        brightness_range=tuple(section["brightness_range"]),
        saturation_range=tuple(section["saturation_range"]),
        contrast_range=tuple(section["contrast_range"]),
        rng_seed=args.seed if args.seed is not None else section["seed"],
        shuffle_order=section["shuffle_order"],
    )
    raw = load_image_file(args.image)
    img = SrgbImage(np.clip(raw.data, 0.0, 1.0))
    mask = _load_mask_file(args.mask)

    rng = make_rng(jcfg.rng_seed)
    factors = sample_jitter_factors(jcfg, rng)
    out = apply_color_jitter(img, mask, factors)
    save_image_png16(args.out, out)
    if args.log:
        record = {"image": str(args.image), "seed": jcfg.rng_seed,
                  "factors": factors.as_dict(), "config_hash": cfg.hash}
        with open(args.log, "a") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    return 0


# --------------------------------------------------------------- serve-mock

def cmd_serve_mock(args) -> int:
    oracle = _parse_oracle(args.oracle)
    if args.noise_sigma:
        oracle = OracleConfig(oracle=oracle.oracle, structure_noise_sigma=args.noise_sigma)
    handler = make_handler(oracle)
    if args.transport == "stdio":
        serve_stdio(handler)
        return 0
    if args.transport.startswith("http:"):
        port = int(args.transport.split(":", 1)[1])
        server = serve_http(handler, port)
        print(f"listening on http://127.0.0.1:{server.server_address[1]}", file=sys.stderr)
        try:
            server.serve_forever()
        except KeyboardInterrupt:  # pragma: no cover
            pass
        finally:
            server.server_close()
        return 0
    raise UsageError(f"--transport must be stdio or http:PORT, got {args.transport!r}")


# ------------------------------------------------------------------ pyramid

def cmd_pyramid(args) -> int:
    if args.random:
        parts = args.random.lower().split("x")
        if len(parts) != 3:
            raise UsageError(f"--random must be HxWxC, got {args.random!r}")
        h, w, c = (int(p) for p in parts)
        rng = make_rng(args.seed)
        tensorfile.write_tensor(args.out, rng.standard_normal((h, w, c)).astype(np.float32))
        return 0
    if not args.tensor:
        raise UsageError("pyramid needs a tensor file or --random HxWxC")
    plane, _ = tensorfile.read_tensor(args.tensor)
    out = high_freq_extract(plane.astype(np.float64), PyramidConfig(levels=args.levels))
    tensorfile.write_tensor(args.out, out.astype(np.float32), levels=args.levels)
    return 0


# -------------------------------------------------------------------- main

def build_parser() -> _Parser:
    parser = _Parser(prog="illumchart", description=__doc__)
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="single-image illuminant estimate")
    p.add_argument("image")
    p.add_argument("--config")
    p.add_argument("--backend", help="mock | http://HOST:PORT | subprocess command")
    p.add_argument("--oracle", help="r,g,b or gray-world (mock backend only)")
    p.add_argument("--noise-sigma", type=float, dest="noise_sigma")
    p.add_argument("--center")
    p.add_argument("--checker-width", type=int, dest="checker_width")
    p.add_argument("--bbox")
    p.add_argument("--gt", help="ground-truth illuminant r,g,b")
    p.add_argument("--sweep", help="ROWSxCOLS placement sweep")
    p.add_argument("--sweep-out", dest="sweep_out")
    p.add_argument("--wb-out", dest="wb_out")
    p.add_argument("--json", help="write the result JSON here instead of stdout")
    p.add_argument("--debug-dir", dest="debug_dir")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("spatial", help="grid-based spatially varying estimate")
    p.add_argument("image")
    p.add_argument("--config")
    p.add_argument("--backend")
    p.add_argument("--oracle")
    p.add_argument("--noise-sigma", type=float, dest="noise_sigma")
    p.add_argument("--grid", help="ROWSxCOLS, default 4x4")
    p.add_argument("--map-out", dest="map_out", help="write float32 map tensor here")
    p.add_argument("--map-png", dest="map_png", help="write chromaticity visualization here")
    p.add_argument("--gt-map", dest="gt_map", help="tensor file with the reference map")
    p.add_argument("--json")
    p.set_defaults(func=cmd_spatial, center=None, checker_width=None, bbox=None)

    p = sub.add_parser("whitebalance", help="apply a known illuminant")
    p.add_argument("image")
    p.add_argument("--illum", required=True)
    p.add_argument("--gamma", type=float, default=2.2)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_whitebalance)

    p = sub.add_parser("baseline", help="run a statistical estimator over a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--method")
    p.add_argument("--p", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--config")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--no-mask-checker", action="store_true", dest="no_mask_checker")
    p.add_argument("-o", "--out", required=True, help="per-image CSV path")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("evaluate", help="run an evaluation protocol")
    p.add_argument("--protocol", required=True,
                   choices=sorted(set(PROTOCOL_ALIASES) | set(PROTOCOL_ALIASES.values())))
    p.add_argument("--seed", type=int)
    p.add_argument("--estimator", required=True,
                   help="baseline:NAME | mock | backend:ENDPOINT")
    p.add_argument("--manifest", required=True)
    p.add_argument("--test-manifest", dest="test_manifest")
    p.add_argument("--oracle")
    p.add_argument("--config")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.set_defaults(func=cmd_evaluate, center=None, checker_width=None, bbox=None,
                   noise_sigma=None)

    p = sub.add_parser("augment", help="preview masked color jitter")
    p.add_argument("image")
    p.add_argument("--mask", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--log", help="append a JSON-lines record here")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("serve-mock", help="serve the oracle backend")
    p.add_argument("--oracle", help="r,g,b or gray-world (default)")
    p.add_argument("--noise-sigma", type=float, dest="noise_sigma", default=0.0)
    p.add_argument("--transport", default="stdio", help="stdio or http:PORT")
    p.set_defaults(func=cmd_serve_mock)

    p = sub.add_parser("pyramid", help="high-frequency extraction on tensor files")
    p.add_argument("tensor", nargs="?")
    p.add_argument("--levels", type=int, default=2)
    p.add_argument("--random", help="generate a HxWxC standard-normal tensor instead")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_pyramid)

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(
            level=logging.DEBUG if args.verbose else logging.INFO,
            stream=sys.stderr,
            format="%(levelname)s %(name)s: %(message)s",
        )
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, InvalidInputError, PlacementError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (TransportError, ProtocolError, BackendFailure) as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return 3
    except (EstimationFailedError, SamplingError) as exc:
        print(f"estimation failed: {exc}", file=sys.stderr)
        return 4
    except IllumchartError as exc:  # base-class fallback
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
