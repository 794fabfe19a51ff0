"""Run a sweep config and print median ACC/NMI per cell, pooling over seeds.

    python scripts/sweep_table.py scripts/configs/depth_sweep.json --out runs/depth
    python scripts/sweep_table.py scripts/configs/overclustering.json --out runs/overclustering
"""

import argparse
import statistics
from collections import defaultdict

from ccl.harness.sweep import load_sweep, run_sweep


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("config")
    ap.add_argument("--out", default=None, help="write sweep.csv and run directories here")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    base, axes = load_sweep(args.config)
    rows = run_sweep(base, axes, out_dir=args.out, workers=args.workers)
    keys = [k for k in axes if k not in ("seed", "hidden_width")]
    cells = defaultdict(list)
    for r in rows:
        if r["status"] == "ok":
            cells[tuple(r[k] for k in keys)].append(r)
    print("  ".join([*(f"{k:>12}" for k in keys), "   n  med_acc  med_nmi  min_acc  max_acc"]))
    for cell, rs in sorted(cells.items()):
        accs = [r["acc"] for r in rs]
        stats = (
            f"{len(rs):4d}  {statistics.median(accs):.4f}  {statistics.median(r['nmi'] for r in rs):.4f}"
            f"  {min(accs):.4f}  {max(accs):.4f}"
        )
        print("  ".join([*(f"{v!s:>12}" for v in cell), stats]))
    failed = [r for r in rows if r["status"] != "ok"]
    for r in failed:
        print("failed:", r["error"])


if __name__ == "__main__":
    main()
