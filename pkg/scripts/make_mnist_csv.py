"""Convert MNIST IDX files to label-first CSV (``label,pixel0..pixel783``).

    python scripts/make_mnist_csv.py DATA_DIR OUT_DIR [--train 10000] [--test 2000]

DATA_DIR holds the four standard IDX files (for example from the
``mnist-data`` npm package). Writes ``mnist_train_<n>.csv.gz`` and
``mnist_test_<n>.csv.gz``, taking the first rows of each split.
"""
import argparse
import gzip
from pathlib import Path

import numpy as np


def read_idx(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    ndim = raw[3]
    shape = tuple(int.from_bytes(raw[4 + 4 * k: 8 + 4 * k], "big") for k in range(ndim))
    return np.frombuffer(raw, dtype=np.uint8, offset=4 + 4 * ndim).reshape(shape)


def write_csv(path: Path, images: np.ndarray, labels: np.ndarray):
    header = "label," + ",".join(f"pixel{k}" for k in range(images.shape[1]))
    lines = [header] + [f"{y}," + ",".join(map(str, row.tolist())) for y, row in zip(labels, images)]
    with open(path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", compresslevel=9, mtime=0) as fh:
        fh.write(("\n".join(lines) + "\n").encode("utf-8"))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("data_dir", type=Path)
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--train", type=int, default=10_000)
    ap.add_argument("--test", type=int, default=2_000)
    args = ap.parse_args()
    d = args.data_dir
    for split, prefix, n in (("train", "train", args.train), ("test", "t10k", args.test)):
        images = read_idx(d / f"{prefix}-images-idx3-ubyte").reshape(-1, 784)[:n]
        labels = read_idx(d / f"{prefix}-labels-idx1-ubyte")[:n]
        write_csv(args.out_dir / f"mnist_{split}_{n // 1000}k.csv.gz", images, labels)


if __name__ == "__main__":
    main()
