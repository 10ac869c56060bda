#!/usr/bin/env python3
"""Convert the digit JSON files shipped in the npm `mnist` package into IDX files.

The package carries 10000 MNIST digits stored as 784 floats (pixel / 255,
rounded to three decimals). Bytes are recovered with round(v * 255). The
digits are shuffled with a fixed seed; the last 1000 become the test split.

    npm pack mnist@1.1.0 && tar xzf mnist-1.1.0.tgz
    python3 tools/mnist_from_npm.py package/src/digits data/mnist
"""
import json
import pathlib
import random
import struct
import sys


def write_idx_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main(src, dst, test_count=1000, seed=20220101):
    src, dst = pathlib.Path(src), pathlib.Path(dst)
    samples = []
    for digit in range(10):
        data = json.loads((src / f"{digit}.json").read_text())["data"]
        assert len(data) % 784 == 0
        for i in range(0, len(data), 784):
            pixels = [min(255, max(0, round(v * 255))) for v in data[i:i + 784]]
            samples.append((pixels, digit))
    random.Random(seed).shuffle(samples)
    train, test = samples[:-test_count], samples[-test_count:]
    dst.mkdir(parents=True, exist_ok=True)
    for name, split in (("train", train), ("t10k", test)):
        write_idx_images(dst / f"{name}-images-idx3-ubyte", [s[0] for s in split])
        write_idx_labels(dst / f"{name}-labels-idx1-ubyte", [s[1] for s in split])
    print(f"train={len(train)} test={len(test)} -> {dst}")


if __name__ == "__main__":
    main(*sys.argv[1:3])
