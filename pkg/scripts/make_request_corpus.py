#!/usr/bin/env python3
"""Regenerate the recorded request corpus under golden/requests/.

Any protocol-compliant backend must answer every `expect: ok` frame with a
well-formed response envelope (version 1, echoed id, matching dims,
non-mask pixels within the locality threshold) and every `expect: error`
frame with an error envelope while staying alive. corpus.json describes
the expected checks per frame.
"""

import argparse
import json
from pathlib import Path

import numpy as np

from illumchart import CheckerLayout, LinearImage, composite_checker, gamma_encode
from illumchart.checker import CheckerPlacement
from illumchart.protocol import AblationConfig, BackendConfig, BackendRequest, encode_request


def checker_request(request_id, size, seed, config):
    rng = np.random.Generator(np.random.PCG64(seed))
    scene = gamma_encode(LinearImage(rng.uniform(0.05, 0.5, (size, size, 3))), 2.2)
    placement = CheckerPlacement(center=(size / 2, size / 2),
                                 checker_width=int(0.4 * size))
    composited, mask = composite_checker(scene, CheckerLayout(), placement)
    return BackendRequest(request_id=request_id, image=composited, mask=mask, config=config)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir",
                        default=Path(__file__).resolve().parent.parent / "golden" / "requests")
    args = parser.parse_args()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    entries = []

    cases = [
        ("req_64_default", 64, 1, BackendConfig()),
        ("req_96_prompted", 96, 2, BackendConfig(text_prompt="a color calibration chart on a desk")),
        ("req_128_no_laplacian", 128, 3, BackendConfig(ablation=AblationConfig(laplacian=False))),
        ("req_64_levels3", 64, 4, BackendConfig(pyramid_levels=3)),
    ]
    for name, size, seed, config in cases:
        req = checker_request(name, size, seed, config)
        payload = encode_request(req)
        (out_dir / f"{name}.bin").write_bytes(payload)
        entries.append({
            "file": f"{name}.bin",
            "expect": "ok",
            "request_id": name,
            "width": size,
            "height": size,
        })

    (out_dir / "malformed_json.bin").write_bytes(b'{"protocol_version": 1, "request_id": ')
    entries.append({"file": "malformed_json.bin", "expect": "error"})

    bad_version = json.loads(encode_request(checker_request("bad_version", 64, 5, BackendConfig())))
    bad_version["protocol_version"] = 99
    (out_dir / "bad_version.bin").write_bytes(json.dumps(bad_version).encode())
    entries.append({"file": "bad_version.bin", "expect": "error"})

    (out_dir / "corpus.json").write_text(json.dumps({
        "schema_version": 1,
        "locality_warn_threshold": 2 / 255,
        "entries": entries,
    }, indent=1, sort_keys=True) + "\n")
    print(f"wrote {len(entries)} corpus entries to {out_dir}")


if __name__ == "__main__":
    main()
