"""Grid sweeps over run-config axes, one CSV row per run.

Sweep file schema::

    base: {...}        # a full run config (see ccl.harness.config)
    axes:              # any subset; the cross product is run
      loss_kind: [ccl, kcl]
      hidden_layers: [2, 8]         # hidden_dims becomes [width] * n
      hidden_width: 64              # optional scalar used by hidden_layers
      k_out: [10, 50]
      noise_rate: [0.0, 0.1]        # sets both flip rates
      false_positive_rate: [...]
      false_negative_rate: [...]
      seed: [0, 1, 2]
"""

from __future__ import annotations

import csv
import itertools
import logging
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from ..errors import ConfigError
from .config import RunConfig, config_from_dict, read_structured
from .experiment import run_experiment

log = logging.getLogger(__name__)

AXES = ("loss_kind", "hidden_layers", "k_out", "noise_rate", "false_positive_rate", "false_negative_rate", "seed")
RESULT_COLUMNS = ("acc", "nmi", "k_pred_used", "final_loss", "duration_s", "fingerprint", "status", "error")
DEFAULT_HIDDEN_WIDTH = 64


def apply_axes(base: RunConfig, point: dict, hidden_width: int | None = None) -> RunConfig:
    cfg = base.copy()
    for name, value in point.items():
        if name == "loss_kind":
            cfg.loss.kind = value
        elif name == "hidden_layers":
            width = hidden_width or (base.network.hidden_dims[0] if base.network.hidden_dims else DEFAULT_HIDDEN_WIDTH)
            cfg.network.hidden_dims = [int(width)] * int(value)
        elif name == "k_out":
            cfg.network.k_out = int(value)
        elif name == "noise_rate":
            cfg.noise.false_positive_rate = float(value)
            cfg.noise.false_negative_rate = float(value)
        elif name in ("false_positive_rate", "false_negative_rate"):
            setattr(cfg.noise, name, float(value))
        elif name == "seed":
            cfg.seed = int(value)
        else:
            raise ConfigError(f"invalid sweep axis {name!r}; expected one of {AXES}")
    return cfg.validate()


def expand(base: RunConfig, axes: dict) -> list[tuple[dict, RunConfig]]:
    axes = dict(axes or {})
    hidden_width = axes.pop("hidden_width", None)
    for name in axes:
        if name not in AXES:
            raise ConfigError(f"invalid sweep axis {name!r}; expected one of {AXES}")
    names = list(axes)
    values = [list(axes[n]) if isinstance(axes[n], (list, tuple)) else [axes[n]] for n in names]
    points = []
    for combo in itertools.product(*values):
        point = dict(zip(names, combo))
        points.append((point, apply_axes(base, point, hidden_width)))
    return points


def _run_one(args):
    point, cfg_dict, out_dir = args
    cfg = config_from_dict(cfg_dict)
    row = dict(point)
    try:
        res = run_experiment(cfg, out_dir=out_dir, eval_every_epoch=False)
        row.update(
            acc=res.report.acc,
            nmi=res.report.nmi,
            k_pred_used=res.report.k_pred_used,
            final_loss=res.final_loss,
            duration_s=res.duration,
            fingerprint=res.fingerprint[:16],
            status="ok",
            error="",
        )
    except Exception as exc:  # a failed run is recorded, the sweep goes on
        log.warning("run %s failed: %s", point, exc)
        row.update(
            acc="", nmi="", k_pred_used="", final_loss="", duration_s="",
            fingerprint=cfg.fingerprint()[:16], status="failed",
            error=f"{type(exc).__name__}: {exc}".replace("\n", " "),
        )
        log.debug("%s", traceback.format_exc())
    return row


def run_sweep(base: RunConfig, axes: dict, out_dir=None, workers: int = 1) -> list[dict]:
    points = expand(base, axes)
    run_root = str(Path(out_dir) / "runs") if out_dir is not None else None
    jobs = [(p, c.to_dict(), run_root) for p, c in points]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_one, jobs))
    else:
        rows = [_run_one(j) for j in jobs]
    if out_dir is not None:
        axis_names = [n for n in (axes or {}) if n != "hidden_width"]
        write_rows(Path(out_dir) / "sweep.csv", rows, axis_names)
    return rows


def write_rows(path, rows, axis_names) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=[*axis_names, *RESULT_COLUMNS], lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)


def load_sweep(path) -> tuple[RunConfig, dict]:
    raw = read_structured(path)
    unknown = set(raw) - {"base", "axes"}
    if unknown:
        raise ConfigError(f"unknown key(s) in sweep config: {sorted(unknown)}")
    return config_from_dict(raw.get("base", {"data": {"kind": "blobs"}})), raw.get("axes") or {}
