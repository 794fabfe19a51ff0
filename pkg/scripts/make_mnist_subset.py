"""Write IDX files for the 5000-digit MNIST sample bundled with mlxtend.

Useful when the full dataset cannot be downloaded: 4000 shuffled digits go to
the train files and 1000 to the t10k files. mlxtend itself need not be
installed, only its wheel or the extracted ``mnist_5k.csv.gz``.

    pip download mlxtend --no-deps -d /tmp/wheels
    python scripts/make_mnist_subset.py /tmp/wheels/mlxtend-*.whl data/mnist-5k
    CCL_MNIST_DIR=data/mnist-5k python scripts/mnist.py --epochs 450 --milestones 150 300
"""

import argparse
import gzip
import io
import zipfile
from pathlib import Path

import numpy as np

from ccl.data import write_idx

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("source", type=Path, help="mlxtend wheel or mnist_5k.csv.gz")
    ap.add_argument("out", type=Path)
    ap.add_argument("--n-test", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if args.source.suffix == ".whl":
        blob = zipfile.ZipFile(args.source).read(MEMBER)
    else:
        blob = args.source.read_bytes()
    table = np.loadtxt(io.TextIOWrapper(gzip.GzipFile(fileobj=io.BytesIO(blob))), delimiter=",")
    table = table[np.random.default_rng(args.seed).permutation(len(table))]
    images = table[:, :-1].reshape(-1, 28, 28).astype(np.uint8)
    labels = table[:, -1].astype(np.uint8)
    cut = len(table) - args.n_test
    args.out.mkdir(parents=True, exist_ok=True)
    write_idx(args.out / "train-images-idx3-ubyte", images[:cut])
    write_idx(args.out / "train-labels-idx1-ubyte", labels[:cut])
    write_idx(args.out / "t10k-images-idx3-ubyte", images[cut:])
    write_idx(args.out / "t10k-labels-idx1-ubyte", labels[cut:])
    print(f"wrote {cut} train / {args.n_test} test digits to {args.out}")


if __name__ == "__main__":
    main()
