"""Datasets: synthetic generators, IDX/CSV loaders, standardisation and batch iteration."""

from __future__ import annotations

import csv
import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    CountMismatchError,
    CSVFormatError,
    DataError,
    GenerationError,
    PreconditionError,
    TruncatedFileError,
)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray | None = None
    name: str = "dataset"

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        if x.ndim != 2:
            raise DataError(f"features must be a 2-D matrix, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise DataError("features contain non-finite values")
        object.__setattr__(self, "features", x)
        if self.labels is not None:
            y = np.asarray(self.labels)
            if y.shape != (x.shape[0],):
                raise DataError(f"{y.size} labels for {x.shape[0]} samples")
            object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, idx, name=None) -> "Dataset":
        labels = None if self.labels is None else self.labels[idx]
        return Dataset(self.features[idx], labels, name or self.name)


def gen_blobs(k: int, per_cluster: int, d: int, separation: float, seed: int, max_tries: int = 100) -> Dataset:
    """``k`` unit-variance isotropic Gaussians whose centres are pairwise >= ``separation`` apart.

    Centres are drawn uniformly from a ball of radius ``separation * k**(1/d)``
    and rejected when they land too close to an accepted one.
    """
    if k < 2 or per_cluster < 1 or d < 1 or not separation > 0:
        raise PreconditionError(f"bad blob parameters k={k} per_cluster={per_cluster} d={d} separation={separation}")
    rng = np.random.default_rng(seed)
    radius = separation * k ** (1.0 / d)
    centers = None
    for _ in range(max_tries):
        placed = []
        attempts = 0
        while len(placed) < k and attempts < 1000 * k:
            attempts += 1
            direction = rng.standard_normal(d)
            direction /= np.linalg.norm(direction)
            c = direction * radius * rng.random() ** (1.0 / d)
            if all(np.linalg.norm(c - o) >= separation for o in placed):
                placed.append(c)
        if len(placed) == k:
            centers = np.array(placed)
            break
    if centers is None:
        raise GenerationError(f"could not place {k} centres {separation} apart in {d} dimensions")
    labels = np.repeat(np.arange(k), per_cluster)
    x = centers[labels] + rng.standard_normal((k * per_cluster, d))
    return Dataset(x, labels, f"blobs-k{k}-d{d}-sep{separation:g}")


def gen_two_moons(n: int, noise_sigma: float, seed: int) -> Dataset:
    """Two interleaved half circles, ``n // 2`` points each, with Gaussian jitter."""
    if n < 2 or n % 2 or noise_sigma < 0:
        raise PreconditionError(f"two moons needs an even n >= 2 and noise >= 0, got n={n} noise={noise_sigma}")
    rng = np.random.default_rng(seed)
    half = n // 2
    t_outer = rng.uniform(0.0, np.pi, half)
    t_inner = rng.uniform(0.0, np.pi, half)
    outer = np.column_stack([np.cos(t_outer), np.sin(t_outer)])
    inner = np.column_stack([1.0 - np.cos(t_inner), 0.5 - np.sin(t_inner)])
    x = np.vstack([outer, inner])
    if noise_sigma > 0:
        x = x + noise_sigma * rng.standard_normal(x.shape)
    labels = np.repeat([0, 1], half)
    return Dataset(x, labels, f"moons-n{n}-noise{noise_sigma:g}")


def _open_maybe_gz(path):
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(2)
    return gzip.open(path, "rb") if head == b"\x1f\x8b" else open(path, "rb")


def _read_idx(path, magic: int) -> np.ndarray:
    with _open_maybe_gz(path) as fh:
        raw = fh.read()
    if len(raw) < 8:
        raise TruncatedFileError(f"{path}: header truncated")
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise BadMagicError(f"{path}: magic 0x{found:08x}, expected 0x{magic:08x}")
    ndim = magic & 0xFF
    header_len = 4 + 4 * ndim
    if len(raw) < header_len:
        raise TruncatedFileError(f"{path}: header truncated")
    shape = struct.unpack(f">{ndim}I", raw[4:header_len])
    size = int(np.prod(shape))
    if len(raw) - header_len < size:
        raise TruncatedFileError(f"{path}: expected {size} payload bytes, found {len(raw) - header_len}")
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=header_len).reshape(shape)


def load_idx(images_path, labels_path, name: str = "idx") -> Dataset:
    """Load an IDX image/label pair (optionally gzipped); pixels are scaled to [0, 1]."""
    images = _read_idx(images_path, IDX_IMAGES_MAGIC)
    labels = _read_idx(labels_path, IDX_LABELS_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise CountMismatchError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    x = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    return Dataset(x, labels.astype(np.int64), name)


def write_idx(path, array: np.ndarray) -> None:
    """Write a uint8 array as IDX (magic 0x0801 for 1-D, 0x0803 for 3-D)."""
    array = np.ascontiguousarray(array, dtype=np.uint8)
    magic = 0x00000800 | array.ndim
    with open(path, "wb") as fh:
        fh.write(struct.pack(">I", magic))
        fh.write(struct.pack(f">{array.ndim}I", *array.shape))
        fh.write(array.tobytes())


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def load_csv(path, label_column=None, name: str | None = None) -> Dataset:
    """Read a numeric CSV; the first row is a header iff it holds a non-numeric cell.

    ``label_column`` is a header name or a 0-based column index.  Row numbers in
    errors are 1-based file lines.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh)]
    rows_numbered = [(i + 1, r) for i, r in enumerate(rows) if any(cell.strip() for cell in r)]
    if not rows_numbered:
        raise CSVFormatError(f"{path}: no data rows")
    header = None
    if not all(_is_number(c) for c in rows_numbered[0][1]):
        header = [c.strip() for c in rows_numbered[0][1]]
        rows_numbered = rows_numbered[1:]
    if not rows_numbered:
        raise CSVFormatError(f"{path}: no data rows")
    width = len(header) if header is not None else len(rows_numbered[0][1])
    values = np.empty((len(rows_numbered), width))
    for out_i, (lineno, row) in enumerate(rows_numbered):
        if len(row) != width:
            raise CSVFormatError(f"{path}: row {lineno} has {len(row)} columns, expected {width}", row=lineno)
        for j, cell in enumerate(row):
            try:
                values[out_i, j] = float(cell)
            except ValueError:
                raise CSVFormatError(f"{path}: non-numeric cell {cell!r} at row {lineno}", row=lineno) from None
    labels = None
    if label_column is not None:
        if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
            if header is None or label_column not in header:
                raise CSVFormatError(f"{path}: no column named {label_column!r}")
            col = header.index(label_column)
        else:
            col = int(label_column)
            if not -width <= col < width:
                raise CSVFormatError(f"{path}: label column {col} out of range for {width} columns")
            col %= width
        labels = values[:, col].astype(np.int64)
        values = np.delete(values, col, axis=1)
    return Dataset(values, labels, name or Path(path).stem)


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, x) -> "Standardizer":
        x = np.asarray(x, dtype=np.float64)
        std = x.std(axis=0)
        return cls(x.mean(axis=0), np.where(std > 0, std, 1.0))

    def apply(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.scale

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d) -> "Standardizer":
        return cls(np.asarray(d["mean"], dtype=np.float64), np.asarray(d["scale"], dtype=np.float64))


def train_test_split(ds: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    if not 0.0 < test_fraction < 1.0:
        raise PreconditionError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    perm = np.random.default_rng([seed, 0x5EED]).permutation(ds.n)
    n_test = max(1, int(round(test_fraction * ds.n)))
    return ds.subset(np.sort(perm[n_test:]), ds.name + "-train"), ds.subset(np.sort(perm[:n_test]), ds.name + "-test")


@dataclass(frozen=True)
class BatchSampler:
    batch_size: int
    seed: int = 0
    stratified: bool = False

    def __post_init__(self):
        if self.batch_size < 2:
            raise PreconditionError(f"batch_size must be >= 2 for pairwise losses, got {self.batch_size}")


def iterate_batches(ds: Dataset, sampler: BatchSampler, epoch: int) -> list[np.ndarray]:
    """Index batches for one epoch; a trailing chunk smaller than 2 is dropped.

    The permutation is seeded by ``(sampler.seed, epoch)``.  In stratified mode
    each class is permuted separately and the classes are interleaved
    round-robin before chunking, so every batch sees a near-even class mix.
    """
    n = ds.n
    if sampler.batch_size > n:
        raise PreconditionError(f"batch_size {sampler.batch_size} exceeds dataset size {n}")
    rng = np.random.default_rng([sampler.seed, epoch])
    if sampler.stratified:
        if ds.labels is None:
            raise PreconditionError("stratified sampling requires labels")
        classes = np.unique(ds.labels)
        per_class = [rng.permutation(np.flatnonzero(ds.labels == c)) for c in classes]
        longest = max(len(p) for p in per_class)
        order = [p[i] for i in range(longest) for p in per_class if i < len(p)]
        order = np.array(order, dtype=np.intp)
    else:
        order = rng.permutation(n)
    batches = [order[s : s + sampler.batch_size] for s in range(0, n, sampler.batch_size)]
    if len(batches[-1]) < 2:
        batches.pop()
    return batches
