"""Command line entry point: ``ccl {train,eval,kmeans,sweep}``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from ..errors import ConfigError, DataError, PreconditionError, TrainingError
from ..metrics import evaluate
from .config import load_config
from .experiment import dataset_from_spec, evaluate_checkpoint, run_experiment
from .kmeans import kmeans
from .sweep import load_sweep, run_sweep

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def _emit(record: dict) -> None:
    print(json.dumps(record, sort_keys=True))


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    if args.epochs is not None:
        cfg.epochs = args.epochs
    res = run_experiment(cfg, out_dir=args.out, resume_from=args.resume)
    record = res.report_dict()
    record["run_dir"] = str(res.out_dir)
    _emit(record)
    return EXIT_OK


def cmd_eval(args) -> int:
    ds = dataset_from_spec(args.data, seed=args.seed)
    if ds.labels is None:
        raise ConfigError("eval needs a dataset with labels")
    _emit(evaluate_checkpoint(args.checkpoint, ds).to_dict())
    return EXIT_OK


def cmd_kmeans(args) -> int:
    ds = dataset_from_spec(args.data, seed=args.seed)
    if ds.labels is None:
        raise ConfigError("kmeans evaluation needs a dataset with labels")
    res = kmeans(ds.features, args.k, seed=args.seed)
    record = evaluate(res.labels, ds.labels).to_dict()
    record["iterations"] = res.n_iter
    record["inertia"] = res.inertia
    _emit(record)
    return EXIT_OK


def cmd_sweep(args) -> int:
    base, axes = load_sweep(args.config)
    rows = run_sweep(base, axes, out_dir=args.out, workers=args.workers)
    failed = sum(r["status"] != "ok" for r in rows)
    print(f"{len(rows)} runs, {failed} failed -> {args.out}/sweep.csv")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ccl", description="Constrained clustering experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--resume", help="checkpoint to continue from")
    p.add_argument("--epochs", type=int, help="override config epochs")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on a labelled dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="kind:key=val,... or a JSON/YAML data file")
    p.add_argument("--seed", type=int, default=0, help="seed for generators without an explicit seed")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("kmeans", help="k-means baseline")
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_kmeans)

    p = sub.add_parser("sweep", help="grid sweep over config axes")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except TrainingError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, PreconditionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, DataError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
