"""Lloyd's k-means with k-means++ seeding, used as the fixed-metric baseline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import PreconditionError


@dataclass
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    n_iter: int
    inertia: float


def _sq_dists(x, centers):
    # ||x||^2 - 2 x.c + ||c||^2, floored at 0 against cancellation
    d = (x * x).sum(1)[:, None] - 2.0 * x @ centers.T + (centers * centers).sum(1)[None, :]
    return np.maximum(d, 0.0)


def kmeans_plusplus(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    closest = _sq_dists(x, centers[:1])[:, 0]
    for c in range(1, k):
        total = closest.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers[c] = x[idx]
        closest = np.minimum(closest, _sq_dists(x, centers[c : c + 1])[:, 0])
    return centers


def kmeans(x, k: int, seed: int = 0, max_iter: int = 300, tol: float = 1e-6) -> KMeansResult:
    """Cluster ``x`` into ``k`` groups.

    Stops when no centroid moves by more than ``tol`` (Euclidean) or after
    ``max_iter`` iterations.  A cluster that empties is re-seeded at the point
    farthest from its currently assigned centroid.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if k < 1:
        raise PreconditionError(f"k must be >= 1, got {k}")
    if n == 0:
        raise PreconditionError("k-means needs a nonempty dataset")
    if k > n:
        raise PreconditionError(f"k={k} exceeds the number of samples n={n}")
    rng = np.random.default_rng(seed)
    centers = kmeans_plusplus(x, k, rng)
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        d = _sq_dists(x, centers)
        labels = np.argmin(d, axis=1)
        new = np.empty_like(centers)
        counts = np.bincount(labels, minlength=k)
        sums = np.zeros_like(centers)
        np.add.at(sums, labels, x)
        nonempty = counts > 0
        new[nonempty] = sums[nonempty] / counts[nonempty, None]
        if not nonempty.all():
            own = d[np.arange(n), labels]
            taken = set()
            for c in np.flatnonzero(~nonempty):
                order = np.argsort(-own, kind="stable")
                idx = next(i for i in order if i not in taken)
                taken.add(idx)
                new[c] = x[idx]
                own[idx] = 0.0
        shift = np.sqrt(((new - centers) ** 2).sum(axis=1)).max()
        centers = new
        if shift < tol:
            break
    d = _sq_dists(x, centers)
    labels = np.argmin(d, axis=1)
    return KMeansResult(labels, centers, n_iter, float(d[np.arange(n), labels].sum()))
