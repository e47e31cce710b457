#!/usr/bin/env python3
"""Best-effort converter from a NUS-8-style ground-truth layout to our
manifest schema (docs/manifest.md).

Expected inputs, per camera:
  - a directory of linearized 16-bit PNGs (one per original raw frame)
  - the published ground-truth .mat file with fields `groundtruth_illuminants`
    (N x 3) and, when available, `CC_coords` (N x 4, [y0, y1, x0, x1]) plus
    `all_image_names`
  - the camera's black level in raw counts (--dark-level), subtracted at load

This script only rewrites metadata; it never touches pixel data. Verify a
few entries visually before trusting a conversion (public releases differ
in row ordering and bbox conventions).
"""

import argparse
import json
from pathlib import Path

import numpy as np
import scipy.io


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("mat_file", type=Path, help="ground-truth .mat for one camera")
    parser.add_argument("image_dir", type=Path, help="directory of linear 16-bit PNGs")
    parser.add_argument("--camera-id", required=True)
    parser.add_argument("--dark-level", type=float, default=0.0, help="raw counts")
    parser.add_argument("--suffix", default=".png")
    parser.add_argument("-o", "--out", type=Path, required=True)
    args = parser.parse_args()

    mat = scipy.io.loadmat(str(args.mat_file))
    illums = np.asarray(mat["groundtruth_illuminants"], dtype=float)
    names = None
    if "all_image_names" in mat:
        names = [str(n[0]) if isinstance(n, np.ndarray) else str(n)
                 for n in np.asarray(mat["all_image_names"]).squeeze()]
    coords = np.asarray(mat["CC_coords"]) if "CC_coords" in mat else None

    entries = []
    for i, gt in enumerate(illums):
        stem = names[i] if names else f"{args.camera_id}_{i:04d}"
        image_path = args.image_dir / f"{stem}{args.suffix}"
        entry = {
            "image_id": f"{args.camera_id}_{stem}",
            "image_path": str(image_path),
            "camera_id": args.camera_id,
            "gt_illuminant": [float(v) for v in gt],
            "bit_depth": 16,
        }
        if args.dark_level:
            entry["dark_level"] = [args.dark_level] * 3
        if coords is not None:
            y0, y1, x0, x1 = (float(v) for v in coords[i])
            entry["checker_bbox"] = [x0, y0, x1, y1]
        if not image_path.exists():
            print(f"warning: {image_path} not found (entry kept)")
        entries.append(entry)

    args.out.write_text(json.dumps({
        "schema_version": 1,
        "name": f"nus8-{args.camera_id}",
        "entries": entries,
    }, indent=1) + "\n")
    print(f"wrote {len(entries)} entries to {args.out}")


if __name__ == "__main__":
    main()
