"""Training loop, evaluation and on-disk run layout."""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import data as data_mod
from ..constraints import NoiseModel, apply_noise, constraints_from_labels
from ..data import BatchSampler, Dataset, Standardizer, iterate_batches
from ..errors import ConfigError, PreconditionError, TrainingError
from ..loss import LossKind, pairwise_loss
from ..metrics import EvalReport, evaluate
from ..network import (
    LayerSpec,
    backward_from_probs,
    clip_grads,
    enumerate_pairs,
    forward,
    init_params,
    load_checkpoint,
    make_optimizer,
    optimizer_step,
    predict_clusters,
    save_checkpoint,
    step_decay_lr,
)
from .config import DataConfig, RunConfig, config_diff, config_from_dict, read_structured, save_config

log = logging.getLogger(__name__)

REPORT_NAME = "report.json"
CURVE_NAME = "metrics.csv"
CHECKPOINT_NAME = "checkpoint.npz"
CONFIG_NAME = "config.json"
RUNINFO_NAME = "run.json"

# independent RNG streams derived from the run seed
_INIT_STREAM, _BATCH_STREAM, _NOISE_STREAM = 0, 1, 2


@dataclass
class Splits:
    train: Dataset
    eval: Dataset
    standardizer: Standardizer | None = None


@dataclass
class RunResult:
    config: RunConfig
    curve: list = field(default_factory=list)  # rows of (epoch, loss, acc, nmi)
    report: EvalReport | None = None
    final_loss: float | None = None
    duration: float = 0.0
    fingerprint: str = ""
    out_dir: Path | None = None
    params: object = None

    def report_dict(self) -> dict:
        cfg = self.config
        return {
            "fingerprint": self.fingerprint,
            "loss_kind": LossKind.coerce(cfg.loss.kind).value,
            "epochs": cfg.epochs,
            "k_out": cfg.network.k_out,
            "eval_split": cfg.eval_split,
            "final_loss": self.final_loss,
            "eval": self.report.to_dict() if self.report else None,
        }


def load_dataset(dc: DataConfig, seed: int) -> tuple[Dataset, Dataset | None]:
    """Materialise the configured dataset; returns ``(main, explicit_test_or_None)``.

    Generator params default their ``seed`` to the run seed.
    """
    p = dict(dc.params)
    try:
        if dc.kind == "blobs":
            p.setdefault("seed", seed)
            return data_mod.gen_blobs(**p), None
        if dc.kind == "moons":
            p.setdefault("seed", seed)
            return data_mod.gen_two_moons(**p), None
        if dc.kind == "idx":
            main = data_mod.load_idx(p["images"], p["labels"], name=p.get("name", "idx"))
            test = None
            if "test_images" in p:
                test = data_mod.load_idx(p["test_images"], p["test_labels"], name=p.get("name", "idx") + "-test")
            return main, test
        if dc.kind == "csv":
            main = data_mod.load_csv(p["path"], p.get("label_column"))
            test = data_mod.load_csv(p["test_path"], p.get("label_column")) if "test_path" in p else None
            return main, test
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad data.params for kind {dc.kind!r}: {exc}") from None
    raise ConfigError(f"unknown data kind {dc.kind!r}")


def prepare_splits(cfg: RunConfig) -> Splits:
    main, test = load_dataset(cfg.data, cfg.seed)
    if test is None and cfg.data.test_fraction > 0:
        main, test = data_mod.train_test_split(main, cfg.data.test_fraction, cfg.seed)
    if cfg.eval_split == "test":
        if test is None:
            raise ConfigError("eval_split 'test' needs test files or data.test_fraction > 0")
        ev = test
    else:
        ev = main
    std = None
    if cfg.data.standardize:
        std = Standardizer.fit(main.features)
        main = Dataset(std.apply(main.features), main.labels, main.name)
        ev = Dataset(std.apply(ev.features), ev.labels, ev.name)
    if main.labels is None:
        raise ConfigError("training data needs labels to generate pair constraints")
    return Splits(main, ev, std)


def layer_spec(cfg: RunConfig, input_dim: int) -> LayerSpec:
    return LayerSpec(input_dim, tuple(cfg.network.hidden_dims), cfg.network.k_out, cfg.network.activation)


def eval_report(params, ds: Dataset, activation) -> EvalReport:
    if ds.labels is None:
        raise PreconditionError("evaluation needs a labelled dataset")
    return evaluate(predict_clusters(params, ds.features, activation), ds.labels)


def _rng_state(rng: np.random.Generator) -> dict:
    return rng.bit_generator.state


def _restore_rng(state: dict) -> np.random.Generator:
    bg = np.random.PCG64()
    bg.state = state
    return np.random.Generator(bg)


def train(cfg: RunConfig, splits: Splits | None = None, resume: dict | None = None, eval_every_epoch: bool = True):
    """Run the configured training; returns ``(params, spec, optimizer, curve, noise_rng, next_epoch)``.

    ``resume`` holds the pieces loaded from a checkpoint (params, optimizer,
    noise RNG state, next epoch) to continue bit-exactly.
    """
    cfg.validate()
    splits = splits or prepare_splits(cfg)
    train_ds, eval_ds = splits.train, splits.eval
    spec = layer_spec(cfg, train_ds.dim)
    kind = LossKind.coerce(cfg.loss.kind)
    if resume:
        params, opt = resume["params"], resume["optimizer"]
        noise_rng = _restore_rng(resume["noise_rng"])
        start = resume["epoch"]
    else:
        params = init_params(spec, np.random.SeedSequence([cfg.seed, _INIT_STREAM]).generate_state(1)[0])
        opt = make_optimizer(cfg.optimizer_kind(), params, cfg.learning_rate(), cfg.optim.momentum)
        noise_rng = np.random.default_rng([cfg.seed, _NOISE_STREAM])
        start = 0
    noise = NoiseModel(cfg.noise.false_positive_rate, cfg.noise.false_negative_rate, cfg.seed)
    sampler = BatchSampler(cfg.batch_size, seed=int(np.random.SeedSequence([cfg.seed, _BATCH_STREAM]).generate_state(1)[0]), stratified=cfg.stratified)
    base_lr = cfg.learning_rate()
    curve = []
    x, y = train_ds.features, train_ds.labels
    for epoch in range(start, cfg.epochs):
        opt.learning_rate = step_decay_lr(base_lr, epoch, cfg.optim.milestones, cfg.optim.gamma)
        batch_losses = []
        for b, idx in enumerate(iterate_batches(train_ds, sampler, epoch)):
            trace = forward(params, x[idx], spec.activation)
            cs = constraints_from_labels(y[idx], enumerate_pairs(len(idx)))
            if not noise.is_noiseless:
                cs = apply_noise(cs, noise, rng=noise_rng)
            loss, grad_probs = pairwise_loss(
                trace.probs, cs.rows, cs.cols, cs.similar, kind, cfg.loss.margin, cfg.loss.weighting
            )
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch} batch {b}", epoch, b)
            grads = backward_from_probs(params, trace, grad_probs)
            if cfg.optim.clip_norm is not None:
                grads = clip_grads(grads, cfg.optim.clip_norm)
            try:
                optimizer_step(params, grads, opt)
            except TrainingError as exc:
                raise TrainingError(f"{exc} at epoch {epoch} batch {b}", epoch, b) from None
            batch_losses.append(loss)
        epoch_loss = float(np.mean(batch_losses)) if batch_losses else float("nan")
        if eval_every_epoch or epoch == cfg.epochs - 1:
            rep = eval_report(params, eval_ds, spec.activation)
            curve.append((epoch, epoch_loss, rep.acc, rep.nmi))
        else:
            curve.append((epoch, epoch_loss, float("nan"), float("nan")))
        log.debug("epoch %d loss %.6f acc %.4f", epoch, epoch_loss, curve[-1][2])
    return params, spec, opt, curve, noise_rng, cfg.epochs


def _curve_csv(curve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "loss", "acc", "nmi"])
    for epoch, loss, acc, nmi_v in curve:
        w.writerow([epoch, repr(float(loss)), repr(float(acc)), repr(float(nmi_v))])
    return buf.getvalue()


def run_experiment(
    cfg: RunConfig,
    out_dir=None,
    resume_from=None,
    eval_every_epoch: bool = True,
    save: bool = True,
) -> RunResult:
    """Train, evaluate and (when ``out_dir`` is given) write the run directory.

    Files land in ``out_dir/<fingerprint[:16]>/``: ``config.json``,
    ``metrics.csv``, ``report.json`` (deterministic, no timing),
    ``run.json`` (wall clock) and ``checkpoint.npz``.
    """
    t0 = time.perf_counter()
    cfg.validate()
    splits = prepare_splits(cfg)
    resume = None
    prior_curve = []
    if resume_from is not None:
        resume, prior_curve = _resume_state(resume_from, cfg)
    params, spec, opt, curve, noise_rng, next_epoch = train(cfg, splits, resume, eval_every_epoch)
    curve = prior_curve + curve
    report = eval_report(params, splits.eval, spec.activation)
    result = RunResult(
        config=cfg,
        curve=curve,
        report=report,
        final_loss=curve[-1][1] if curve else None,
        duration=time.perf_counter() - t0,
        fingerprint=cfg.fingerprint(),
        params=params,
    )
    if out_dir is not None and save:
        run_dir = Path(out_dir) / result.fingerprint[:16]
        run_dir.mkdir(parents=True, exist_ok=True)
        save_config(cfg, run_dir / CONFIG_NAME)
        (run_dir / CURVE_NAME).write_text(_curve_csv(curve))
        (run_dir / REPORT_NAME).write_text(json.dumps(result.report_dict(), indent=2, sort_keys=True) + "\n")
        meta = {
            "config": cfg.to_dict(),
            "fingerprint": result.fingerprint,
            "epoch": next_epoch,
            "noise_rng": _rng_state(noise_rng),
            "standardizer": splits.standardizer.to_dict() if splits.standardizer else None,
            "curve": [list(map(float, row)) for row in curve],
        }
        save_checkpoint(run_dir / CHECKPOINT_NAME, spec, params, opt, meta)
        (run_dir / RUNINFO_NAME).write_text(
            json.dumps({"fingerprint": result.fingerprint, "duration_s": result.duration}, indent=2) + "\n"
        )
        result.out_dir = run_dir
    return result


def _resume_state(path, cfg: RunConfig):
    spec, params, opt, meta = load_checkpoint(path)
    stored = config_from_dict(meta["config"])
    diff = {k: v for k, v in config_diff(stored, cfg).items() if k != "epochs"}
    if diff:
        raise ConfigError(f"checkpoint was trained with a different config: {sorted(diff)}")
    if opt is None:
        raise ConfigError("checkpoint has no optimizer state; cannot resume")
    curve = [(int(r[0]), r[1], r[2], r[3]) for r in meta.get("curve", [])]
    return {"params": params, "optimizer": opt, "noise_rng": meta["noise_rng"], "epoch": int(meta["epoch"])}, curve


# --------------------------------------------------------------------------
# data specs on the command line


def _parse_scalar(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    return text


def parse_data_spec(spec: str) -> tuple[DataConfig, str]:
    """Parse ``kind:key=val,...`` or a JSON/YAML file into ``(DataConfig, split)``.

    A file may be a whole run config (its ``data`` section is used) or a bare
    data section.  The pseudo-key ``split`` (``all``, ``train`` or ``test``)
    selects part of a dataset with ``test_fraction`` set; it defaults to ``all``.
    """
    path = Path(spec)
    if path.suffix.lower() in (".json", ".yaml", ".yml") and path.exists():
        raw = read_structured(path)
        raw = raw.get("data", raw)
        split = raw.pop("split", "all") if isinstance(raw, dict) else "all"
        try:
            dc = DataConfig(**raw)
        except TypeError as exc:
            raise ConfigError(f"{path}: bad data section: {exc}") from None
        return dc, split
    kind, _, rest = spec.partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        key, eq, value = item.partition("=")
        if not eq:
            raise ConfigError(f"data spec item {item!r} is not key=value")
        params[key.strip()] = _parse_scalar(value.strip())
    split = params.pop("split", "all")
    standardize = bool(params.pop("standardize", False))
    test_fraction = float(params.pop("test_fraction", 0.0))
    if kind not in ("blobs", "moons", "idx", "csv"):
        raise ConfigError(f"unknown data kind {kind!r} in spec {spec!r}")
    return DataConfig(kind, params, standardize, test_fraction), split


def dataset_from_spec(spec: str, seed: int = 0) -> Dataset:
    dc, split = parse_data_spec(spec)
    main, test = load_dataset(dc, seed)
    if split == "all":
        return main
    if split not in ("train", "test"):
        raise ConfigError(f"split must be all, train or test, got {split!r}")
    if test is None:
        if not dc.test_fraction > 0:
            raise ConfigError(f"split={split} needs test files or test_fraction > 0")
        main, test = data_mod.train_test_split(main, dc.test_fraction, seed)
    return main if split == "train" else test


def evaluate_checkpoint(checkpoint_path, ds: Dataset) -> EvalReport:
    """Predict with a saved network and score against ``ds.labels``; parameters are read-only."""
    if ds.labels is None:
        raise PreconditionError("evaluation needs a labelled dataset")
    spec, params, _, meta = load_checkpoint(checkpoint_path)
    if ds.dim != spec.input_dim:
        raise ConfigError(f"checkpoint expects {spec.input_dim} features, dataset has {ds.dim}")
    x = ds.features
    if meta.get("standardizer"):
        x = Standardizer.from_dict(meta["standardizer"]).apply(x)
    return evaluate(predict_clusters(params, x, spec.activation), ds.labels)
