#!/usr/bin/env python3
"""Write a stratified IDX digit subset (default 2000 train / 1000 test).

The source is any CSV of 28x28 digit images with 784 pixel columns followed
by the label, e.g. the 5000-sample MNIST extract that ships inside the
mlxtend wheel (mlxtend/data/data/mnist_5k.csv.gz).
"""
import argparse
import gzip
import pathlib
import random
import struct


def read_rows(path):
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rt") as fh:
        for line in fh:
            vals = [int(float(v)) for v in line.strip().split(",")]
            yield bytes(vals[:784]), vals[784]


def write_idx(out_dir, stem, samples):
    images = out_dir / f"{stem}-images-idx3-ubyte"
    labels = out_dir / f"{stem}-labels-idx1-ubyte"
    with open(images, "wb") as fh:
        fh.write(struct.pack(">IIII", 0x00000803, len(samples), 28, 28))
        for px, _ in samples:
            fh.write(px)
    with open(labels, "wb") as fh:
        fh.write(struct.pack(">II", 0x00000801, len(samples)))
        fh.write(bytes(label for _, label in samples))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv")
    ap.add_argument("out_dir")
    ap.add_argument("--train", type=int, default=2000)
    ap.add_argument("--test", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=20211)
    args = ap.parse_args()

    by_class = {}
    for px, label in read_rows(args.csv):
        by_class.setdefault(label, []).append((px, label))
    rng = random.Random(args.seed)
    classes = sorted(by_class)
    for c in classes:
        rng.shuffle(by_class[c])
    per_train = args.train // len(classes)
    per_test = args.test // len(classes)
    train, test = [], []
    for c in classes:
        train += by_class[c][:per_train]
        test += by_class[c][per_train:per_train + per_test]
    rng.shuffle(train)
    rng.shuffle(test)
    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_idx(out, "digits-train", train)
    write_idx(out, "digits-test", test)
    print(f"wrote {len(train)} train / {len(test)} test samples to {out}")


if __name__ == "__main__":
    main()
