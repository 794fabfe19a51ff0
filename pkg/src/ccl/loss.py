"""Pairwise clustering losses over categorical cluster-assignment distributions.

Two objectives are provided:

* CCL, the negative log-likelihood of the pairwise constraints when the
  probability that two samples share a cluster is the inner product of their
  assignment distributions.
* KCL, the hinge/KL contrastive baseline: symmetric KL divergence pulls
  similar pairs together and a margin hinge on each KL direction pushes
  dissimilar pairs apart.

Every function returns gradients with respect to the *probabilities*; the
softmax Jacobian is applied by :mod:`ccl.network`.  All arithmetic is float64.

There are two routes to a batch loss.  :func:`batch_loss` walks a list of
``(p, q, label)`` triples through the scalar pair functions, and
:func:`pairwise_loss` evaluates all enumerated pairs of a probability matrix
with dense matrix products.  They agree to rounding and the tests hold them
against each other.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, DimensionError, PreconditionError

EPS = 1e-12
DEFAULT_MARGIN = 2.0
SIMPLEX_ATOL = 1e-6


class PairLabel(enum.IntEnum):
    DISSIMILAR = 0
    SIMILAR = 1

    @classmethod
    def coerce(cls, value) -> "PairLabel":
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            key = value.strip().lower()
            if key in ("similar", "+", "s", "must-link"):
                return cls.SIMILAR
            if key in ("dissimilar", "-", "d", "cannot-link"):
                return cls.DISSIMILAR
            raise ValueError(f"unknown pair label {value!r}")
        return cls(int(bool(value)))


class LossKind(str, enum.Enum):
    CCL = "ccl"
    KCL = "kcl"

    @classmethod
    def coerce(cls, value) -> "LossKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigError(f"unknown loss kind {value!r}; expected 'ccl' or 'kcl'") from None


class PairWeighting(str, enum.Enum):
    MEAN = "mean"
    BALANCED = "balanced"


@dataclass(frozen=True)
class PairLossGrad:
    loss: float
    grad_p: np.ndarray
    grad_q: np.ndarray


def as_prob_vector(p, atol: float = SIMPLEX_ATOL) -> np.ndarray:
    """Validate and return ``p`` as a float64 point on the probability simplex."""
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise DimensionError(f"probability vector must be 1-D and nonempty, got shape {arr.shape}")
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise PreconditionError("probability vector has negative or non-finite entries")
    if abs(arr.sum() - 1.0) > atol:
        raise PreconditionError(f"probability vector sums to {arr.sum():.8g}, not 1")
    return arr


def _check_pair(p, q):
    p = as_prob_vector(p)
    q = as_prob_vector(q)
    if p.shape != q.shape:
        raise DimensionError(f"length mismatch: {p.size} vs {q.size}")
    return p, q


def pair_similarity_prob(p, q) -> float:
    """Probability that two independent categorical draws land in the same cluster."""
    p, q = _check_pair(p, q)
    return float(p @ q)


def ccl_pair_loss(p, q, label) -> PairLossGrad:
    p, q = _check_pair(p, q)
    label = PairLabel.coerce(label)
    s = float(p @ q)
    if label is PairLabel.SIMILAR:
        arg = min(max(s, EPS), 1.0)
        return PairLossGrad(-np.log(arg), -q / arg, -p / arg)
    arg = min(max(1.0 - s, EPS), 1.0)
    return PairLossGrad(-np.log(arg), q / arg, p / arg)


def _kl_and_grads(p, q):
    """KL(p||q) with clamped logs, and its partials w.r.t. p and q."""
    log_p = np.log(np.maximum(p, EPS))
    log_q = np.log(np.maximum(q, EPS))
    kl = float(p @ (log_p - log_q))
    d_p = log_p - log_q + (p > EPS)
    d_q = np.where(q > EPS, -p / np.maximum(q, EPS), 0.0)
    return kl, d_p, d_q


def kcl_pair_loss(p, q, label, margin: float = DEFAULT_MARGIN) -> PairLossGrad:
    if not margin > 0:
        raise ConfigError(f"KCL margin must be positive, got {margin}")
    p, q = _check_pair(p, q)
    label = PairLabel.coerce(label)
    kl_pq, dpq_p, dpq_q = _kl_and_grads(p, q)
    kl_qp, dqp_q, dqp_p = _kl_and_grads(q, p)
    if label is PairLabel.SIMILAR:
        return PairLossGrad(kl_pq + kl_qp, dpq_p + dqp_p, dpq_q + dqp_q)
    loss = 0.0
    grad_p = np.zeros_like(p)
    grad_q = np.zeros_like(q)
    if margin - kl_pq > 0:
        loss += margin - kl_pq
        grad_p -= dpq_p
        grad_q -= dpq_q
    if margin - kl_qp > 0:
        loss += margin - kl_qp
        grad_p -= dqp_p
        grad_q -= dqp_q
    return PairLossGrad(loss, grad_p, grad_q)


def pair_loss(p, q, label, loss_kind=LossKind.CCL, margin: float = DEFAULT_MARGIN) -> PairLossGrad:
    if LossKind.coerce(loss_kind) is LossKind.CCL:
        return ccl_pair_loss(p, q, label)
    return kcl_pair_loss(p, q, label, margin)


def _pair_weights(similar: np.ndarray, weighting) -> np.ndarray:
    weighting = PairWeighting(weighting)
    m = similar.size
    if weighting is PairWeighting.MEAN:
        return np.full(m, 1.0 / m)
    n_sim = int(similar.sum())
    n_dis = m - n_sim
    if n_sim == 0 or n_dis == 0:
        return np.full(m, 1.0 / m)
    return np.where(similar, 0.5 / n_sim, 0.5 / n_dis)


def batch_loss(
    pair_probs: Sequence[tuple],
    loss_kind=LossKind.CCL,
    margin: float = DEFAULT_MARGIN,
    weighting=PairWeighting.MEAN,
) -> tuple[float, list[PairLossGrad]]:
    """Reduce per-pair losses over a list of ``(p, q, label)`` triples.

    Returns the weighted loss (the plain mean by default) and the per-pair
    gradients already multiplied by each pair's weight.
    """
    if len(pair_probs) == 0:
        raise PreconditionError("batch_loss needs at least one pair")
    kind = LossKind.coerce(loss_kind)
    results = [pair_loss(p, q, lab, kind, margin) for p, q, lab in pair_probs]
    similar = np.array([PairLabel.coerce(lab) is PairLabel.SIMILAR for _, _, lab in pair_probs])
    w = _pair_weights(similar, weighting)
    total = float(sum(wi * r.loss for wi, r in zip(w, results)))
    scaled = [PairLossGrad(r.loss, wi * r.grad_p, wi * r.grad_q) for wi, r in zip(w, results)]
    return total, scaled


def pairwise_loss(
    probs: np.ndarray,
    rows: np.ndarray,
    cols: np.ndarray,
    similar: np.ndarray,
    loss_kind=LossKind.CCL,
    margin: float = DEFAULT_MARGIN,
    weighting=PairWeighting.MEAN,
) -> tuple[float, np.ndarray]:
    """Dense-matrix evaluation of the batch loss.

    ``probs`` is the ``n x k`` matrix of assignment distributions and
    ``(rows[m], cols[m], similar[m])`` describe the constrained pairs.  Returns
    the reduced loss and ``dL/dprobs`` (``n x k``).
    """
    P = np.asarray(probs, dtype=np.float64)
    rows = np.asarray(rows, dtype=np.intp)
    cols = np.asarray(cols, dtype=np.intp)
    similar = np.asarray(similar, dtype=bool)
    if P.ndim != 2:
        raise DimensionError(f"probs must be 2-D, got shape {P.shape}")
    if not (rows.shape == cols.shape == similar.shape) or rows.ndim != 1:
        raise DimensionError("rows, cols and similar must be aligned 1-D arrays")
    if rows.size == 0:
        raise PreconditionError("pairwise_loss needs at least one pair")
    n = P.shape[0]
    if rows.min() < 0 or cols.min() < 0 or rows.max() >= n or cols.max() >= n:
        raise DimensionError("pair index out of range for probability matrix")
    kind = LossKind.coerce(loss_kind)
    if kind is LossKind.KCL and not margin > 0:
        raise ConfigError(f"KCL margin must be positive, got {margin}")
    w = _pair_weights(similar, weighting)

    if kind is LossKind.CCL:
        s = np.einsum("ij,ij->i", P[rows], P[cols])
        arg = np.where(similar, s, 1.0 - s)
        arg = np.clip(arg, EPS, 1.0)
        losses = -np.log(arg)
        # d loss / d s: -1/arg for similar, +1/arg for dissimilar
        coef = w * np.where(similar, -1.0, 1.0) / arg
        C = np.zeros((n, n))
        np.add.at(C, (rows, cols), coef)
        grad = C @ P + C.T @ P
        return float(w @ losses), grad

    L = np.log(np.maximum(P, EPS))
    R = np.where(P > EPS, 1.0 / np.maximum(P, EPS), 0.0)
    M = (P > EPS).astype(np.float64)
    neg_entropy = np.einsum("ij,ij->i", P, L)
    kl_rc = neg_entropy[rows] - np.einsum("ij,ij->i", P[rows], L[cols])
    kl_cr = neg_entropy[cols] - np.einsum("ij,ij->i", P[cols], L[rows])
    hinge_rc = margin - kl_rc
    hinge_cr = margin - kl_cr
    losses = np.where(similar, kl_rc + kl_cr, np.maximum(hinge_rc, 0.0) + np.maximum(hinge_cr, 0.0))
    a_rc = w * np.where(similar, 1.0, -(hinge_rc > 0).astype(np.float64))
    a_cr = w * np.where(similar, 1.0, -(hinge_cr > 0).astype(np.float64))
    # A[x, y] is the total coefficient on KL(p_x || p_y)
    A = np.zeros((n, n))
    np.add.at(A, (rows, cols), a_rc)
    np.add.at(A, (cols, rows), a_cr)
    grad = A.sum(axis=1)[:, None] * (L + M) - A @ L - (A.T @ P) * R
    return float(w @ losses), grad
