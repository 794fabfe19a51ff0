"""Two moons: k-means against a CCL-trained MLP on the same points."""

import argparse

from ccl.data import Standardizer, gen_two_moons
from ccl.harness.config import config_from_dict
from ccl.harness.experiment import run_experiment
from ccl.harness.kmeans import kmeans
from ccl.metrics import evaluate


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--noise", type=float, default=0.1)
    ap.add_argument("--seeds", type=int, default=5)
    args = ap.parse_args()

    for seed in range(args.seeds):
        ds = gen_two_moons(args.n, args.noise, seed)
        x = Standardizer.fit(ds.features).apply(ds.features)
        km = evaluate(kmeans(x, 2, seed=seed).labels, ds.labels).acc
        cfg = config_from_dict({
            "data": {"kind": "moons", "params": {"n": args.n, "noise_sigma": args.noise}, "standardize": True},
            "network": {"hidden_dims": [64, 64], "k_out": 2},
            "epochs": 100,
            "batch_size": 100,
            "seed": seed,
        })
        net = run_experiment(cfg, eval_every_epoch=False).report.acc
        print(f"seed {seed}: k-means ACC {km:.4f}   CCL MLP ACC {net:.4f}")


if __name__ == "__main__":
    main()
