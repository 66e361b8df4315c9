#!/usr/bin/env python3
"""Build IDX files from the 10,000 MNIST digits bundled in the npm `mnist` package.

The package stores each digit class as a JSON array of pixel intensities
rounded to three decimals; round(v * 255) recovers the original bytes.
Digits are shuffled with a fixed seed and split into a training part and a
designated test part, written as gzip-compressed IDX files:

    python3 scripts/mnist_from_npm.py --package <dir with src/digits> --out data/mnist

Obtain the package with `npm pack mnist && tar xzf mnist-*.tgz`.
"""

import argparse
import gzip
import json
import random
import struct
from pathlib import Path


def load_digits(package: Path):
    samples = []
    for digit in range(10):
        values = json.loads((package / "src" / "digits" / f"{digit}.json").read_text())["data"]
        if len(values) % 784:
            raise SystemExit(f"digit {digit}: {len(values)} values is not a multiple of 784")
        for i in range(0, len(values), 784):
            pixels = bytes(min(255, max(0, round(v * 255))) for v in values[i : i + 784])
            samples.append((pixels, digit))
    return samples


def write_gz(path: Path, payload: bytes):
    # mtime=0 keeps the archive bytes reproducible.
    with open(path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as gz:
        gz.write(payload)


def write_split(samples, out: Path, prefix: str):
    images = struct.pack(">IIII", 0x803, len(samples), 28, 28) + b"".join(p for p, _ in samples)
    labels = struct.pack(">II", 0x801, len(samples)) + bytes(l for _, l in samples)
    write_gz(out / f"{prefix}-images-idx3-ubyte.gz", images)
    write_gz(out / f"{prefix}-labels-idx1-ubyte.gz", labels)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--package", type=Path, required=True, help="unpacked npm package directory")
    ap.add_argument("--out", type=Path, default=Path("data/mnist"))
    ap.add_argument("--test", type=int, default=3000, help="digits reserved for the test split")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    samples = load_digits(args.package)
    random.Random(args.seed).shuffle(samples)
    args.out.mkdir(parents=True, exist_ok=True)
    write_split(samples[args.test :], args.out, "train")
    write_split(samples[: args.test], args.out, "t10k")
    print(f"train {len(samples) - args.test}, test {args.test} -> {args.out}")


if __name__ == "__main__":
    main()
