#!/usr/bin/env python3
"""Generate a synthetic cover corpus as PGM files plus a manifest.

The manifest (covers.txt inside the output directory) lists one image
path per line and is what every CLI command takes as --covers. Images
are deterministic in (tag, index, size): regenerating with the same
arguments reproduces the corpus byte for byte.
"""

import argparse
from pathlib import Path

from mctsteg import media, rng, synth


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--count", type=int, default=100, help="number of covers")
    parser.add_argument("--size", type=int, default=64, help="square image side")
    parser.add_argument(
        "--tag", type=lambda s: int(s, 0), default=0xA11CE,
        help="corpus tag; per-image seeds derive from it (accepts 0x.. hex)",
    )
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for k in range(args.count):
        img = synth.synth_cover(rng.mix(args.tag, k), args.size)
        path = out / f"cover_{k:05d}.pgm"
        media.write_pgm(img, path)
        paths.append(path)
    manifest = out / "covers.txt"
    media.write_manifest(paths, manifest)
    print(f"wrote {args.count} covers ({args.size}x{args.size}) to {out}")
    print(f"manifest: {manifest}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
