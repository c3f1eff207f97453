#!/usr/bin/env python3
"""Build the MNIST subset used by the anomaly-detection run.

The 5000-digit sample shipped inside the mlxtend wheel (raw MNIST pixels,
500 digits per class) is split per class into 400 training and 100 test
digits and written as IDX files:

    data/mnist/train-images-idx3-ubyte   data/mnist/train-labels-idx1-ubyte
    data/mnist/test-images-idx3-ubyte    data/mnist/test-labels-idx1-ubyte
"""

import argparse
import glob
import gzip
import os
import struct
import subprocess
import sys
import tempfile
import zipfile

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def read_rows(wheel):
    with zipfile.ZipFile(wheel) as z:
        text = gzip.decompress(z.read(MEMBER)).decode()
    rows = []
    for line in text.splitlines():
        vals = [int(float(v)) for v in line.split(",")]
        rows.append((vals[:-1], vals[-1]))
    return rows


def write_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))


def write_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(bytes(labels))


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data", "mnist"))
    ap.add_argument("--wheel", help="use an already downloaded mlxtend wheel")
    ap.add_argument("--train-per-class", type=int, default=400)
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        wheel = args.wheel
        if wheel is None:
            subprocess.run([sys.executable, "-m", "pip", "download", "--no-deps", "-q", "-d", tmp, "mlxtend==0.24.0"],
                           check=True)
            wheel = glob.glob(os.path.join(tmp, "mlxtend-*.whl"))[0]
        rows = read_rows(wheel)

    seen = {}
    split = {"train": ([], []), "test": ([], [])}
    for pixels, label in rows:
        if len(pixels) != 784 or not 0 <= label <= 9:
            sys.exit("unexpected row layout in " + MEMBER)
        k = seen.get(label, 0)
        seen[label] = k + 1
        images, labels = split["train" if k < args.train_per_class else "test"]
        images.append(pixels)
        labels.append(label)

    os.makedirs(args.out, exist_ok=True)
    for name, (images, labels) in split.items():
        write_images(os.path.join(args.out, name + "-images-idx3-ubyte"), images)
        write_labels(os.path.join(args.out, name + "-labels-idx1-ubyte"), labels)
        print(os.path.join(args.out, name + "-images-idx3-ubyte"), len(images))


if __name__ == "__main__":
    main()
