#!/usr/bin/env python3
"""Convert the 10,000 MNIST digits bundled in the npm `mnist` package
(https://www.npmjs.com/package/mnist, MIT) into IDX files.

    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/make_mnist_idx.py package/src/digits data/mnist
"""
import json
import pathlib
import struct
import sys

import numpy as np


def main(src, out):
    src, out = pathlib.Path(src), pathlib.Path(out)
    images, labels = [], []
    for digit in range(10):
        raw = json.loads((src / f"{digit}.json").read_text())["data"]
        px = np.rint(np.asarray(raw, dtype=np.float64) * 255.0).astype(np.uint8).reshape(-1, 28, 28)
        images.append(px)
        labels.append(np.full(len(px), digit, dtype=np.uint8))
    images = np.concatenate(images)
    labels = np.concatenate(labels)
    order = np.random.RandomState(0).permutation(len(labels))
    images, labels = images[order], labels[order]
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(images), 28, 28))
        f.write(images.tobytes())
    with open(out / "labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(labels.tobytes())
    print(len(labels), "images", np.bincount(labels).tolist())


if __name__ == "__main__":
    main(*sys.argv[1:3])
