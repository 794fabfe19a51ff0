"""Train the 784-512-256-10 MLP with CCL on MNIST and report test-set clustering ACC.

Expects the four IDX files (optionally gzipped) under $CCL_MNIST_DIR, default
data/mnist/. Epoch count and decay milestones can be overridden, which is how
the smaller subset from make_mnist_subset.py is given a comparable step budget.
"""

import argparse
import json
import os
from pathlib import Path

from ccl.harness.config import config_from_dict, read_structured
from ccl.harness.experiment import run_experiment

ROOT = Path(__file__).resolve().parents[1]


def resolve(root: Path, name: str) -> str:
    for candidate in (root / name, root / f"{name}.gz"):
        if candidate.exists():
            return str(candidate)
    raise SystemExit(f"missing {name}[.gz] in {root}; set CCL_MNIST_DIR")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--data-dir", default=os.environ.get("CCL_MNIST_DIR", ROOT / "data" / "mnist"), type=Path)
    ap.add_argument("--config", default=ROOT / "scripts" / "configs" / "mnist_mlp.yaml", type=Path)
    ap.add_argument("--epochs", type=int)
    ap.add_argument("--milestones", type=int, nargs="*")
    ap.add_argument("--loss", choices=("ccl", "kcl"))
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    raw = read_structured(args.config)
    raw["data"]["params"] = {k: resolve(args.data_dir, v) for k, v in raw["data"]["params"].items()}
    if args.epochs is not None:
        raw["epochs"] = args.epochs
    if args.milestones is not None:
        raw["optim"]["milestones"] = args.milestones
    if args.loss:
        raw["loss"]["kind"] = args.loss
    res = run_experiment(config_from_dict(raw), out_dir=args.out)
    for epoch, loss, acc, nmi in res.curve:
        print(f"epoch {epoch:3d}  loss {loss:.5f}  test acc {acc:.4f}  nmi {nmi:.4f}")
    print(json.dumps(res.report_dict(), indent=2))


if __name__ == "__main__":
    main()
