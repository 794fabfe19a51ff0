"""Similar/dissimilar pair constraints for enumerated in-batch pairs.

Constraints come either from ground-truth labels or from a simulated noisy
similarity oracle that flips labels at fixed false-positive/false-negative
rates.  A :class:`ConstraintSet` stores its pairs as aligned index arrays plus
a boolean label vector, which is the layout the vectorised loss consumes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, DimensionError, PreconditionError


class ConstraintSource(str, enum.Enum):
    GROUND_TRUTH = "ground_truth"
    NOISY_ORACLE = "noisy_oracle"


@dataclass(frozen=True)
class ConstraintSet:
    rows: np.ndarray
    cols: np.ndarray
    similar: np.ndarray
    source: ConstraintSource = ConstraintSource.GROUND_TRUTH

    def __post_init__(self):
        for name in ("rows", "cols"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.intp))
        object.__setattr__(self, "similar", np.asarray(self.similar, dtype=bool))
        object.__setattr__(self, "source", ConstraintSource(self.source))
        if not (self.rows.shape == self.cols.shape == self.similar.shape) or self.rows.ndim != 1:
            raise DimensionError("rows, cols and similar must be aligned 1-D arrays")

    def __len__(self):
        return int(self.rows.size)

    @property
    def similar_pairs(self) -> set[tuple[int, int]]:
        return set(zip(self.rows[self.similar].tolist(), self.cols[self.similar].tolist()))

    @property
    def dissimilar_pairs(self) -> set[tuple[int, int]]:
        d = ~self.similar
        return set(zip(self.rows[d].tolist(), self.cols[d].tolist()))


@dataclass(frozen=True)
class NoiseModel:
    false_positive_rate: float = 0.0
    false_negative_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("false_positive_rate", "false_negative_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")

    @property
    def is_noiseless(self) -> bool:
        return self.false_positive_rate == 0.0 and self.false_negative_rate == 0.0


def constraints_from_labels(labels, pairs) -> ConstraintSet:
    """Label each pair similar iff both endpoints carry the same class id."""
    labels = np.asarray(labels)
    rows, cols = (np.asarray(a, dtype=np.intp) for a in pairs)
    if rows.size and (min(rows.min(), cols.min()) < 0 or max(rows.max(), cols.max()) >= labels.size):
        raise DimensionError(f"pair index out of range for {labels.size} labels")
    return ConstraintSet(rows, cols, labels[rows] == labels[cols], ConstraintSource.GROUND_TRUTH)


def apply_noise(cs: ConstraintSet, noise: NoiseModel, rng: np.random.Generator | None = None) -> ConstraintSet:
    """Flip similar labels w.p. ``false_negative_rate`` and dissimilar labels w.p. ``false_positive_rate``.

    Pass ``rng`` to draw from a caller-owned stream (the training loop does,
    so every batch sees fresh noise); otherwise a generator is seeded from
    ``noise.seed``.
    """
    if cs.source is not ConstraintSource.GROUND_TRUTH:
        raise PreconditionError("noise can only be applied to ground-truth constraints")
    if rng is None:
        rng = np.random.default_rng(noise.seed)
    u = rng.random(len(cs))
    flip_prob = np.where(cs.similar, noise.false_negative_rate, noise.false_positive_rate)
    flipped = u < flip_prob
    return ConstraintSet(cs.rows, cs.cols, cs.similar ^ flipped, ConstraintSource.NOISY_ORACLE)


@dataclass(frozen=True)
class ConstraintQuality:
    similar_precision: float
    similar_recall: float
    dissimilar_precision: float
    dissimilar_recall: float


def _ratio(num, den):
    # an empty reference or prediction set is vacuously perfect
    return 1.0 if den == 0 else num / den


def constraint_quality(noisy: ConstraintSet, truth: ConstraintSet) -> ConstraintQuality:
    key_n = noisy.rows.astype(np.int64) * (1 << 32) + noisy.cols
    key_t = truth.rows.astype(np.int64) * (1 << 32) + truth.cols
    order_n, order_t = np.argsort(key_n, kind="stable"), np.argsort(key_t, kind="stable")
    if key_n.size != key_t.size or np.any(key_n[order_n] != key_t[order_t]):
        raise DataError("noisy and truth constraint sets cover different pairs")
    pred = noisy.similar[order_n]
    ref = truth.similar[order_t]
    tp = int(np.sum(pred & ref))
    tn = int(np.sum(~pred & ~ref))
    return ConstraintQuality(
        similar_precision=_ratio(tp, int(pred.sum())),
        similar_recall=_ratio(tp, int(ref.sum())),
        dissimilar_precision=_ratio(tn, int((~pred).sum())),
        dissimilar_recall=_ratio(tn, int((~ref).sum())),
    )


def dump_constraints(cs: ConstraintSet, path) -> None:
    """Write one ``i j +`` / ``i j -`` line per pair."""
    with open(path, "w") as fh:
        for i, j, s in zip(cs.rows.tolist(), cs.cols.tolist(), cs.similar.tolist()):
            fh.write(f"{i} {j} {'+' if s else '-'}\n")


def load_constraints(path, source=ConstraintSource.GROUND_TRUTH) -> ConstraintSet:
    rows, cols, sim = [], [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3 or parts[2] not in "+-" or len(parts[2]) != 1:
                raise DataError(f"{path}:{lineno}: expected 'i j +|-', got {line!r}")
            try:
                i, j = int(parts[0]), int(parts[1])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-integer index in {line!r}") from None
            rows.append(i)
            cols.append(j)
            sim.append(parts[2] == "+")
    return ConstraintSet(np.array(rows, dtype=np.intp), np.array(cols, dtype=np.intp), np.array(sim, dtype=bool), source)
