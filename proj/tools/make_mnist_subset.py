"""Build the 6000/1000 MNIST subset in gzipped IDX form.

Source: the digit files shipped in the `mnist` npm package
(`npm pack mnist`, then src/digits/0.json ... 9.json). Each file holds a
flat "data" array of 784 grey levels in [0, 1] per image.

    python3 tools/make_mnist_subset.py <digits-dir> data/mnist-subset
"""

import argparse
import gzip
import json
import pathlib
import random
import struct


def load(digits_dir):
    items = []
    for label in range(10):
        data = json.loads((digits_dir / f"{label}.json").read_text())["data"]
        for i in range(len(data) // 784):
            pixels = bytes(round(v * 255) for v in data[i * 784:(i + 1) * 784])
            items.append((pixels, label))
    return items


def write_images(path, items):
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, len(items), 28, 28))
        for pixels, _ in items:
            f.write(pixels)


def write_labels(path, items):
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, len(items)))
        f.write(bytes(label for _, label in items))


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("digits_dir", type=pathlib.Path)
    ap.add_argument("out_dir", type=pathlib.Path)
    ap.add_argument("--train", type=int, default=6000)
    ap.add_argument("--test", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    items = load(args.digits_dir)
    random.Random(args.seed).shuffle(items)
    if args.train + args.test > len(items):
        ap.error(f"only {len(items)} images available")
    train, test = items[:args.train], items[args.train:args.train + args.test]
    args.out_dir.mkdir(parents=True, exist_ok=True)
    write_images(args.out_dir / "train-images-idx3-ubyte.gz", train)
    write_labels(args.out_dir / "train-labels-idx1-ubyte.gz", train)
    write_images(args.out_dir / "t10k-images-idx3-ubyte.gz", test)
    write_labels(args.out_dir / "t10k-labels-idx1-ubyte.gz", test)
    print(f"wrote {len(train)} train and {len(test)} test images to {args.out_dir}")


if __name__ == "__main__":
    main()
