"""Central finite-difference check of the full network + pairwise loss pipeline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .loss import pairwise_loss
from .network import MLPParams, backward_from_probs, enumerate_pairs, forward


def pipeline_loss(params: MLPParams, x, similar, kind, margin=2.0, activation="relu", weighting="mean") -> float:
    trace = forward(params, x, activation)
    rows, cols = enumerate_pairs(x.shape[0])
    return pairwise_loss(trace.probs, rows, cols, similar, kind, margin, weighting)[0]


def pipeline_grad(params: MLPParams, x, similar, kind, margin=2.0, activation="relu", weighting="mean") -> MLPParams:
    trace = forward(params, x, activation)
    rows, cols = enumerate_pairs(x.shape[0])
    _, g = pairwise_loss(trace.probs, rows, cols, similar, kind, margin, weighting)
    return backward_from_probs(params, trace, g)


@dataclass
class GradCheck:
    analytic: np.ndarray
    numeric: np.ndarray

    def max_rel_error(self, floor: float = 1e-8) -> float:
        a, n = self.analytic, self.numeric
        mask = np.abs(a) > floor
        if not mask.any():
            return 0.0
        return float(np.max(np.abs(a - n)[mask] / np.maximum(np.abs(a), np.abs(n))[mask]))


def check_gradients(params: MLPParams, x, similar, kind, h: float = 1e-5, **kw) -> GradCheck:
    """Perturb every parameter by ``+-h`` and compare with backprop."""
    analytic = np.concatenate([g.ravel() for g in pipeline_grad(params, x, similar, kind, **kw).arrays()])
    numeric = []
    for arr in params.arrays():
        flat = arr.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = pipeline_loss(params, x, similar, kind, **kw)
            flat[i] = orig - h
            down = pipeline_loss(params, x, similar, kind, **kw)
            flat[i] = orig
            numeric.append((up - down) / (2 * h))
    return GradCheck(analytic, np.asarray(numeric))
