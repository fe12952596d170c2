#!/usr/bin/env python3
"""Build MNIST IDX files from the digit bundle shipped in the npm `mnist` package.

The npm package (https://www.npmjs.com/package/mnist) carries 10,000 MNIST
digits as per-class JSON arrays of 784 floats in [0, 1]. This script rounds
them back to bytes, shuffles with a fixed seed, and writes a train/test split
in the standard big-endian IDX layout that `emnn` reads.

    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/prepare_mnist.py package/ data/mnist --test 2000

If the official IDX files are available, copy them into the output directory
instead; nothing else in the project depends on this script.
"""

import argparse
import json
import pathlib
import random
import struct
import tarfile
import tempfile

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
SIDE = 28


def load_digits(package_dir: pathlib.Path):
    samples = []
    for digit in range(10):
        with open(package_dir / "src" / "digits" / f"{digit}.json") as f:
            flat = json.load(f)["data"]
        count = len(flat) // (SIDE * SIDE)
        for i in range(count):
            pixels = flat[i * SIDE * SIDE:(i + 1) * SIDE * SIDE]
            raw = bytes(min(255, max(0, round(p * 255))) for p in pixels)
            samples.append((raw, digit))
    return samples


def write_split(out: pathlib.Path, prefix: str, samples):
    with open(out / f"{prefix}-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", IMAGE_MAGIC, len(samples), SIDE, SIDE))
        for raw, _ in samples:
            f.write(raw)
    with open(out / f"{prefix}-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", LABEL_MAGIC, len(samples)))
        f.write(bytes(label for _, label in samples))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("package", type=pathlib.Path,
                        help="unpacked npm package directory or the .tgz")
    parser.add_argument("out", type=pathlib.Path)
    parser.add_argument("--test", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=20240601)
    args = parser.parse_args()

    package = args.package
    tmp = None
    if package.is_file():
        tmp = tempfile.TemporaryDirectory()
        with tarfile.open(package) as tar:
            tar.extractall(tmp.name)
        package = pathlib.Path(tmp.name) / "package"

    samples = load_digits(package)
    random.Random(args.seed).shuffle(samples)
    test, train = samples[:args.test], samples[args.test:]

    args.out.mkdir(parents=True, exist_ok=True)
    write_split(args.out, "train", train)
    write_split(args.out, "t10k", test)
    print(f"wrote {len(train)} train / {len(test)} test samples to {args.out}")


if __name__ == "__main__":
    main()
