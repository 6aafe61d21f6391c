"""Convert the per-digit JSON dumps of the `mnist` npm package into gzipped
IDX files (the standard MNIST layout).

usage: python3 mnist_to_idx.py <package>/src/digits <out_dir> [test_fraction]
"""
import gzip
import json
import random
import struct
import sys
from pathlib import Path


def read_digit(path):
    dec = json.JSONDecoder()
    s = path.read_text()
    i, out = 0, []
    while True:
        while i < len(s) and s[i] in " \n\r\t,":
            i += 1
        if i >= len(s):
            return out
        obj, i = dec.raw_decode(s, i)
        data = obj["data"]
        # one flat array of concatenated 28x28 images per digit
        out.extend(data[k:k + 784] for k in range(0, len(data), 784))


def write_idx(path, magic, dims, payload):
    with open(path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as f:
        f.write(struct.pack(">I", magic))
        for dim in dims:
            f.write(struct.pack(">I", dim))
        f.write(payload)


def main():
    src, out = Path(sys.argv[1]), Path(sys.argv[2])
    frac = float(sys.argv[3]) if len(sys.argv) > 3 else 1 / 6
    samples = []
    for label in range(10):
        for img in read_digit(src / f"{label}.json"):
            assert len(img) == 784
            samples.append((label, bytes(min(255, round(v * 255)) for v in img)))
    random.Random(0).shuffle(samples)
    n_test = int(len(samples) * frac)
    out.mkdir(parents=True, exist_ok=True)
    for name, part in (("t10k", samples[:n_test]), ("train", samples[n_test:])):
        write_idx(out / f"{name}-images-idx3-ubyte.gz", 0x803, (len(part), 28, 28),
                  b"".join(img for _, img in part))
        write_idx(out / f"{name}-labels-idx1-ubyte.gz", 0x801, (len(part),),
                  bytes(label for label, _ in part))
        print(name, len(part))


if __name__ == "__main__":
    main()
