#!/usr/bin/env python3
"""Regenerate the golden tensor files under golden/.

These freeze the high-frequency extraction conventions (kernel, border
handling, pooling, corner-aligned bilinear upsampling) so an independent
backend implementation can prove bit-level agreement. Inputs are seeded
standard-normal planes; outputs record the extraction level in the header.
"""

import argparse
from pathlib import Path

import numpy as np

from illumchart.pyramid import PyramidConfig, high_freq_extract
from illumchart.tensorfile import write_tensor

CASES = [
    # (name, height, width, channels, seed)
    ("plane_16x16x4_seed7", 16, 16, 4, 7),
    ("plane_32x24x4_seed11", 32, 24, 4, 11),
    ("plane_64x64x1_seed3", 64, 64, 1, 3),
]

LEVELS = (1, 2, 3)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default=Path(__file__).resolve().parent.parent / "golden")
    args = parser.parse_args()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    for name, h, w, c, seed in CASES:
        rng = np.random.Generator(np.random.PCG64(seed))
        plane = rng.standard_normal((h, w, c)).astype(np.float32)
        write_tensor(out_dir / f"{name}.tnsr", plane)
        for levels in LEVELS:
            out = high_freq_extract(plane.astype(np.float64), PyramidConfig(levels=levels))
            write_tensor(out_dir / f"{name}.hfe_l{levels}.tnsr", out.astype(np.float32),
                         levels=levels)
        print(f"wrote {name} (+{len(LEVELS)} extractions)")


if __name__ == "__main__":
    main()
