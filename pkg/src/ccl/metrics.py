"""Clustering evaluation: Hungarian-matched accuracy and normalised mutual information."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DimensionError, PreconditionError

BRUTE_FORCE_MAX_DIM = 8


@dataclass(frozen=True)
class ConfusionMatrix:
    """``counts[a, b]`` = samples predicted in cluster ``a`` with true class ``b``.

    ``pred_ids``/``true_ids`` record the original labels behind the dense row
    and column indices.
    """

    counts: np.ndarray
    pred_ids: np.ndarray | None = None
    true_ids: np.ndarray | None = None

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 2 or c.shape[0] < 1 or c.shape[1] < 1:
            raise DimensionError(f"confusion matrix must be 2-D and nonempty, got shape {c.shape}")
        if np.any(c < 0):
            raise PreconditionError("confusion counts must be nonnegative")
        object.__setattr__(self, "counts", c)

    @property
    def n(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class EvalReport:
    acc: float
    nmi: float
    k_pred_used: int
    mapping: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "acc": self.acc,
            "nmi": self.nmi,
            "k_pred_used": self.k_pred_used,
            "mapping": {str(k): v for k, v in sorted(self.mapping.items())},
        }


def confusion(pred, truth) -> ConfusionMatrix:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise DimensionError(f"pred and truth must be equal-length vectors, got {pred.shape} and {truth.shape}")
    if pred.size == 0:
        raise PreconditionError("cannot build a confusion matrix from empty input")
    pred_ids, pi = np.unique(pred, return_inverse=True)
    true_ids, ti = np.unique(truth, return_inverse=True)
    counts = np.zeros((pred_ids.size, true_ids.size), dtype=np.int64)
    np.add.at(counts, (pi, ti), 1)
    return ConfusionMatrix(counts, pred_ids, true_ids)


def clustering_accuracy(cm: ConfusionMatrix) -> tuple[float, dict]:
    """Best one-to-one cluster-to-class matching via Kuhn-Munkres.

    The count matrix is zero-padded to square, so with more clusters than
    classes the surplus clusters are matched to phantom classes and score
    nothing.  Returns ``(acc, mapping)`` where ``mapping`` sends original
    predicted ids to original class ids for every real match.
    """
    counts = cm.counts
    kp, kt = counts.shape
    size = max(kp, kt)
    padded = np.zeros((size, size), dtype=np.int64)
    padded[:kp, :kt] = counts
    rows, cols = linear_sum_assignment(padded, maximize=True)
    matched = int(padded[rows, cols].sum())
    pred_ids = cm.pred_ids if cm.pred_ids is not None else np.arange(kp)
    true_ids = cm.true_ids if cm.true_ids is not None else np.arange(kt)
    mapping = {
        _scalar(pred_ids[r]): _scalar(true_ids[c])
        for r, c in zip(rows, cols)
        if r < kp and c < kt
    }
    n = cm.n
    return (matched / n if n else 0.0), mapping


def _scalar(x):
    return x.item() if hasattr(x, "item") else x


def brute_force_accuracy(cm: ConfusionMatrix) -> float:
    """Exhaustive maximum over injective matchings; a test oracle for small matrices."""
    counts = cm.counts
    kp, kt = counts.shape
    if max(kp, kt) > BRUTE_FORCE_MAX_DIM:
        raise PreconditionError(f"brute force limited to dims <= {BRUTE_FORCE_MAX_DIM}, got {counts.shape}")
    if kp >= kt:
        # every class gets a distinct cluster
        best = max(sum(counts[r, c] for c, r in enumerate(perm)) for perm in itertools.permutations(range(kp), kt))
    else:
        best = max(sum(counts[r, c] for r, c in enumerate(perm)) for perm in itertools.permutations(range(kt), kp))
    n = cm.n
    return int(best) / n if n else 0.0


def _entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return float(-np.sum(p * np.log(p)))


def nmi(cm: ConfusionMatrix) -> float:
    """Mutual information over the geometric mean of the two entropies (natural log)."""
    counts = cm.counts.astype(np.float64)
    counts = counts[counts.sum(axis=1) > 0][:, counts.sum(axis=0) > 0]
    n = counts.sum()
    if n <= 0:
        raise PreconditionError("NMI needs at least one sample")
    h_pred = _entropy(counts.sum(axis=1), n)
    h_true = _entropy(counts.sum(axis=0), n)
    if h_pred == 0.0 and h_true == 0.0:
        return 1.0
    if h_pred == 0.0 or h_true == 0.0:
        return 0.0
    nz = counts > 0
    if np.all(nz.sum(axis=0) == 1) and np.all(nz.sum(axis=1) == 1):
        # identical partitions up to relabelling; exact, no rounding
        return 1.0
    outer = np.outer(counts.sum(axis=1), counts.sum(axis=0))
    mi = float(np.sum(counts[nz] / n * np.log(counts[nz] * n / outer[nz])))
    value = mi / np.sqrt(h_pred * h_true)
    return float(min(max(value, 0.0), 1.0))


def evaluate(pred, truth) -> EvalReport:
    cm = confusion(pred, truth)
    acc, mapping = clustering_accuracy(cm)
    return EvalReport(acc=acc, nmi=nmi(cm), k_pred_used=int(cm.counts.shape[0]), mapping=mapping)
