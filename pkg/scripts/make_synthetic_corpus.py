#!/usr/bin/env python3
"""Generate a synthetic tinted-scene corpus with a manifest, for demos and
for exercising the evaluation harness without any real dataset.

Each scene is random mid-range reflectance multiplied by a random
illuminant tint; the tint (unit-normalized) is the ground truth. Scenes
carry no physical checker, so no checker_bbox is emitted and engine runs
place the virtual checker per config.
"""

import argparse
from pathlib import Path

import numpy as np

from illumchart.color import LinearImage
from illumchart.dataset import DatasetManifest, ManifestEntry, save_image_png16, save_manifest


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir", type=Path)
    parser.add_argument("--count", type=int, default=50)
    parser.add_argument("--size", type=int, default=256)
    parser.add_argument("--cameras", type=int, default=4)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.Generator(np.random.PCG64(args.seed))
    img_dir = args.out_dir / "images"
    img_dir.mkdir(parents=True, exist_ok=True)

    entries = []
    for i in range(args.count):
        tint = rng.uniform(0.4, 1.0, 3)
        reflect = rng.uniform(0.05, 0.6, (args.size, args.size, 3))
        scene = np.clip(reflect * tint, 0.0, 1.0)
        image_id = f"scene{i:04d}"
        path = img_dir / f"{image_id}.png"
        save_image_png16(path, LinearImage(scene))
        entries.append(ManifestEntry(
            image_id=image_id,
            image_path=path,
            camera_id=f"cam{i % args.cameras}",
            gt_illuminant=tuple(tint / np.linalg.norm(tint)),
            width=args.size,
            height=args.size,
        ))

    manifest_path = args.out_dir / "manifest.json"
    save_manifest(DatasetManifest(name="synthetic-tints", entries=tuple(entries)), manifest_path)
    print(f"wrote {args.count} scenes and {manifest_path}")


if __name__ == "__main__":
    main()
