"""Angular-error statistics, evaluation protocols, and report emission.

Conventions (also echoed into every report): quantiles use linear
interpolation of order statistics (Hyndman-Fan type 7); the best/worst 25%
columns are means over the ceil(n/4) smallest/largest errors. Splits are
drawn with Python's Mersenne Twister, which is stable across platforms.
Machine-readable outputs contain no wall-clock values, so equal seeds give
byte-identical files; per-image elapsed_ms is whatever the estimator
deterministically reports (0 for baselines and the mock backend).
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

from .color import Illuminant, LinearImage, angular_error
from .dataset import DatasetManifest, ManifestEntry, load_image_linear
from .errors import DataError, InvalidInputError

logger = logging.getLogger(__name__)

QUANTILE_CONVENTION = "type7_linear"
TAIL_CONVENTION = "mean_of_ceil_n_over_4"

PROTOCOL_KINDS = ("cross_dataset", "leave_one_out_camera", "three_fold")


@dataclass(frozen=True)
class AngularStats:
    mean: float
    median: float
    trimean: float
    best25_mean: float
    worst25_mean: float
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise InvalidInputError("stats need at least one error")

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "median": self.median,
            "trimean": self.trimean,
            "best25_mean": self.best25_mean,
            "worst25_mean": self.worst25_mean,
            "n": self.n,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AngularStats":
        return cls(
            mean=d["mean"], median=d["median"], trimean=d["trimean"],
            best25_mean=d["best25_mean"], worst25_mean=d["worst25_mean"], n=d["n"],
        )


def _quantile_sorted(xs: Sequence[float], p: float) -> float:
    """Type-7 quantile of an already-sorted sequence."""
    h = (len(xs) - 1) * p
    i = int(math.floor(h))
    f = h - i
    if f == 0.0:
        return xs[i]
    if f == 0.5:
        return (xs[i] + xs[i + 1]) / 2.0
    return xs[i] + f * (xs[i + 1] - xs[i])


def compute_stats(errors: Sequence[float]) -> AngularStats:
    """Mean/median/trimean and the 25% tail means of angular errors."""
    xs = sorted(float(e) for e in errors)
    n = len(xs)
    if n == 0:
        raise InvalidInputError("cannot compute statistics of an empty error list")
    if any(not math.isfinite(x) or x < 0 for x in xs):
        raise InvalidInputError("angular errors must be finite and non-negative")

    q1 = _quantile_sorted(xs, 0.25)
    med = _quantile_sorted(xs, 0.5)
    q3 = _quantile_sorted(xs, 0.75)
    k = math.ceil(n / 4)
    return AngularStats(
        mean=math.fsum(xs) / n,
        median=med,
        trimean=(q1 + 2.0 * med + q3) / 4.0,
        best25_mean=math.fsum(xs[:k]) / k,
        worst25_mean=math.fsum(xs[-k:]) / k,
        n=n,
    )


@dataclass(frozen=True)
class ProtocolSpec:
    kind: str
    seed: int = 0
    folds: int = 3
    train_manifest: Optional[str] = None
    test_manifest: Optional[str] = None

    def __post_init__(self):
        if self.kind not in PROTOCOL_KINDS:
            raise InvalidInputError(f"unknown protocol kind {self.kind!r}")
        if self.folds < 2:
            raise InvalidInputError("need at least 2 folds")


def split_three_fold(image_ids: Sequence[str], seed: int, folds: int = 3) -> list[list[str]]:
    """Deterministic, seed-reproducible partition into near-equal folds."""
    ids = sorted(image_ids)
    random.Random(seed).shuffle(ids)
    out: list[list[str]] = [[] for _ in range(folds)]
    for i, image_id in enumerate(ids):
        out[i % folds].append(image_id)
    return [sorted(fold) for fold in out]


def split_leave_one_out(entries: Sequence[ManifestEntry]) -> dict[str, list[str]]:
    """Camera id -> image ids tested in that round."""
    rounds: dict[str, list[str]] = {}
    for e in entries:
        rounds.setdefault(e.camera_id, []).append(e.image_id)
    return {cam: sorted(ids) for cam, ids in sorted(rounds.items())}


# An estimator maps (image, entry) to an Illuminant, optionally paired with
# a deterministic elapsed-ms figure it wants recorded.
Estimator = Callable[[LinearImage, ManifestEntry], Union[Illuminant, tuple[Illuminant, int]]]


@dataclass(frozen=True)
class ImageResult:
    image_id: str
    camera: str
    fold: str
    gt: tuple[float, float, float]
    est: tuple[float, float, float]
    error_deg: float
    elapsed_ms: int


def _evaluate_entry(entry: ManifestEntry, fold: str, estimator: Estimator) -> ImageResult:
    img = load_image_linear(entry)
    result = estimator(img, entry)
    illum, elapsed = result if isinstance(result, tuple) else (result, 0)
    return ImageResult(
        image_id=entry.image_id,
        camera=entry.camera_id,
        fold=fold,
        gt=entry.gt_illuminant,
        est=(illum.r, illum.g, illum.b),
        error_deg=angular_error(illum, entry.gt_illuminant),
        elapsed_ms=int(elapsed),
    )


def run_protocol(spec: ProtocolSpec, estimator: Estimator, manifest: DatasetManifest,
                 test_manifest: Optional[DatasetManifest] = None,
                 jobs: int = 1) -> tuple[AngularStats, list[ImageResult]]:
    """Evaluate the estimator under the protocol; aggregation is order-independent.

    Missing image files are skipped with a warning; more than 5% missing is
    a hard error.
    """
    if spec.kind == "cross_dataset":
        eval_manifest = test_manifest if test_manifest is not None else manifest
        rounds = [("cross", [e.image_id for e in eval_manifest.entries])]
    elif spec.kind == "leave_one_out_camera":
        eval_manifest = manifest
        rounds = [(f"camera:{cam}", ids)
                  for cam, ids in split_leave_one_out(manifest.entries).items()]
    else:
        eval_manifest = manifest
        folds = split_three_fold([e.image_id for e in manifest.entries], spec.seed, spec.folds)
        rounds = [(f"fold:{i}", ids) for i, ids in enumerate(folds)]

    by_id = {e.image_id: e for e in eval_manifest.entries}
    tasks = []
    missing = []
    for fold, ids in rounds:
        for image_id in ids:
            entry = by_id[image_id]
            if not entry.image_path.exists():
                missing.append(image_id)
                continue
            tasks.append((entry, fold))

    total = len(tasks) + len(missing)
    if missing:
        logger.warning("skipping %d missing image(s): %s", len(missing), missing[:10])
        if len(missing) > 0.05 * total:
            raise DataError(
                f"{len(missing)} of {total} images missing exceeds the 5% budget"
            )
    if not tasks:
        raise DataError("no evaluable images in manifest")

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda t: _evaluate_entry(t[0], t[1], estimator), tasks))
    else:
        results = [_evaluate_entry(entry, fold, estimator) for entry, fold in tasks]

    results.sort(key=lambda r: r.image_id)
    stats = compute_stats([r.error_deg for r in results])
    return stats, results


CSV_HEADER = "image_id,camera,fold,gt_r,gt_g,gt_b,est_r,est_g,est_b,error_deg,elapsed_ms"


def results_to_csv(results: Sequence[ImageResult]) -> str:
    lines = [CSV_HEADER]
    for r in results:
        lines.append(
            f"{r.image_id},{r.camera},{r.fold},"
            f"{r.gt[0]:.9f},{r.gt[1]:.9f},{r.gt[2]:.9f},"
            f"{r.est[0]:.9f},{r.est[1]:.9f},{r.est[2]:.9f},"
            f"{r.error_deg:.9f},{r.elapsed_ms}"
        )
    return "\n".join(lines) + "\n"


def content_hash(parts: Sequence[str]) -> str:
    digest = hashlib.sha256()
    for part in parts:
        digest.update(part.encode("utf-8"))
        digest.update(b"\x00")
    return digest.hexdigest()


def emit_report(stats: AngularStats, results: Sequence[ImageResult], out_dir,
                config_echo: Optional[dict] = None, seed: Optional[int] = None,
                extra: Optional[dict] = None) -> dict[str, Path]:
    """Write report.json (machine) and results.csv (per-image rows)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_text = results_to_csv(results)

    config_echo = config_echo or {}
    config_json = json.dumps(config_echo, sort_keys=True)
    report = {
        "schema_version": 1,
        "stats": stats.to_dict(),
        "seed": seed,
        "conventions": {
            "quantiles": QUANTILE_CONVENTION,
            "tails": TAIL_CONVENTION,
        },
        "config_echo": config_echo,
        "config_hash": hashlib.sha256(config_json.encode()).hexdigest(),
        "input_hash": content_hash([r.image_id for r in results] + [csv_text]),
    }
    if extra:
        report.update(extra)

    report_path = out / "report.json"
    csv_path = out / "results.csv"
    report_path.write_text(json.dumps(report, sort_keys=True, indent=1) + "\n")
    csv_path.write_text(csv_text)
    return {"report": report_path, "csv": csv_path}


def load_report_stats(path) -> AngularStats:
    return AngularStats.from_dict(json.loads(Path(path).read_text())["stats"])
