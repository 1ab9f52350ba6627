"""Datasets: synthetic guided-clustering benchmarks, CSV ingestion with
Min-Max normalization, and deterministic stratified splitting.

Normalization statistics are computed over the whole file before any split, so
split members always share one coordinate system; the stored per-column
(min, max) records allow exact denormalization for reporting.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .errors import DataError
from .numerics import STREAM_DATA, STREAM_SPLIT, make_rng

MIN_CSV_ROWS = 10

# Share of each distractor column's variance carried by common low-rank
# factors. Correlation makes the distractor block compressible, which is what
# lets it dominate a reconstruction-driven latent space; the per-column
# marginal stays exactly N(0, scale^2).
_DISTRACTOR_SHARED_ROOT = 0.9
_DISTRACTOR_RANK = 3

# Amplitude of the informative block relative to the cluster-bearing latent u.
# Kept well below the per-column noise scale of the distractors so the cluster
# signal is weak in variance terms yet cleanly decodable in aggregate.
_INFORMATIVE_SCALE = 0.35


@dataclass
class Dataset:
    """Feature matrix X, guiding matrix Y, optional ground-truth labels.

    X and Y are Min-Max normalized; (min, max) per column are kept so values
    can be reported in their original units.
    """

    X: np.ndarray
    Y: np.ndarray
    labels: np.ndarray | None
    feature_names: list[str]
    guide_names: list[str]
    x_min: np.ndarray
    x_max: np.ndarray
    y_min: np.ndarray
    y_max: np.ndarray

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def take(self, indices: np.ndarray) -> "Dataset":
        """Row subset sharing the full-file normalization records."""
        return replace(
            self,
            X=self.X[indices],
            Y=self.Y[indices],
            labels=None if self.labels is None else self.labels[indices],
        )

    def denormalized_x(self) -> np.ndarray:
        return self.X * (self.x_max - self.x_min) + self.x_min

    def denormalized_y(self) -> np.ndarray:
        return self.Y * (self.y_max - self.y_min) + self.y_min


@dataclass
class SyntheticSpec:
    """Recipe for the synthetic benchmark with a dominant-variance trap."""

    k_true: int = 3
    n: int = 5000
    d_latent_true: int = 2
    d_x: int = 50
    d_y: int = 2
    cluster_separation: float = 8.0
    distractor_dims: int = 45
    distractor_scale: float = 10.0
    y_noise_sd: float = 0.25
    seed: int = 0

    def validate(self) -> None:
        if self.k_true < 2:
            raise DataError("k_true must be >= 2")
        if self.d_x < self.d_latent_true + self.distractor_dims:
            raise DataError("d_x must be >= d_latent_true + distractor_dims")
        if self.d_latent_true < self.k_true - 1:
            raise DataError("d_latent_true must be >= k_true - 1 to separate the cluster means")
        if self.n < self.k_true:
            raise DataError("n must be >= k_true")
        if min(self.d_y, self.distractor_dims) < 0 or self.d_x < 1:
            raise DataError("dimensions must be non-negative and d_x >= 1")
        if self.d_y < 1:
            raise DataError("d_y must be >= 1")
        if self.cluster_separation < 0 or self.distractor_scale < 0 or self.y_noise_sd < 0:
            raise DataError("scales must be non-negative")


def simplex_means(k: int, dim: int, separation: float) -> np.ndarray:
    """K points in R^dim at exact pairwise distance ``separation``, centered at 0."""
    if dim < k - 1:
        raise ValueError("need dim >= k - 1 for equidistant points")
    centered = np.eye(k) - 1.0 / k
    gram = centered @ centered.T
    eigvals, eigvecs = np.linalg.eigh(gram)
    coords = eigvecs[:, -(k - 1):] * np.sqrt(np.maximum(eigvals[-(k - 1):], 0.0))
    coords *= separation / np.sqrt(2.0)  # native pairwise distance is sqrt(2)
    out = np.zeros((k, dim))
    out[:, : k - 1] = coords
    return out


def guide_signatures(k: int, d_y: int) -> np.ndarray:
    """Cluster signatures in guide space: scaled one-hot axes, tiers of 2 apart."""
    w = np.zeros((k, d_y))
    for c in range(k):
        w[c, c % d_y] = 2.0 * (c // d_y + 1)
    return w


def _minmax(values: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    lo = values.min(axis=0)
    hi = values.max(axis=0)
    span = hi - lo
    normalized = np.where(span > 0.0, (values - lo) / np.where(span > 0.0, span, 1.0), 0.5)
    return normalized, lo, hi


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Draw the benchmark: cluster-informative features, a correlated
    high-variance distractor block carrying no cluster signal, and a guiding
    variable that is a noisy per-cluster signature."""
    spec.validate()
    rng = make_rng(spec.seed, STREAM_DATA)
    d_inf = spec.d_x - spec.distractor_dims

    labels = rng.integers(spec.k_true, size=spec.n)
    means = simplex_means(spec.k_true, spec.d_latent_true, spec.cluster_separation)
    u = means[labels] + rng.standard_normal((spec.n, spec.d_latent_true))

    # Informative block: a fixed random (semi-orthogonal when possible) map of u.
    mix = rng.standard_normal((d_inf, spec.d_latent_true))
    if d_inf >= spec.d_latent_true:
        mix, _ = np.linalg.qr(mix)
    x_inf = _INFORMATIVE_SCALE * (u @ mix.T) + 0.1 * rng.standard_normal((spec.n, d_inf))

    # Distractor block: zero-mean Gaussian, independent of the cluster, with
    # shared low-rank factors so the block is compressible.
    rank = min(_DISTRACTOR_RANK, spec.distractor_dims) or 1
    shared = rng.standard_normal((spec.n, rank))
    loadings = rng.standard_normal((spec.distractor_dims, rank))
    norms = np.linalg.norm(loadings, axis=1, keepdims=True)
    loadings /= np.where(norms > 0.0, norms, 1.0)
    own = rng.standard_normal((spec.n, spec.distractor_dims))
    residual_root = np.sqrt(1.0 - _DISTRACTOR_SHARED_ROOT**2)
    x_noise = spec.distractor_scale * (
        _DISTRACTOR_SHARED_ROOT * shared @ loadings.T + residual_root * own
    )

    x_raw = np.concatenate([x_inf, x_noise], axis=1)
    y_raw = guide_signatures(spec.k_true, spec.d_y)[labels]
    y_raw = y_raw + spec.y_noise_sd * rng.standard_normal((spec.n, spec.d_y))

    x, x_lo, x_hi = _minmax(x_raw)
    y, y_lo, y_hi = _minmax(y_raw)
    return Dataset(
        X=x,
        Y=y,
        labels=labels.astype(np.int64),
        feature_names=[f"f{i}" for i in range(spec.d_x)],
        guide_names=[f"g{i}" for i in range(spec.d_y)],
        x_min=x_lo,
        x_max=x_hi,
        y_min=y_lo,
        y_max=y_hi,
    )


def load_csv(path, guide_columns: list[str], label_column: str | None = None) -> Dataset:
    """Read a headed numeric CSV; guide columns become Y, the rest become X.

    Every X and Y column is Min-Max normalized with its own observed range;
    constant columns map to 0.5 (their records still denormalize exactly).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        rows = list(reader)

    if len(rows) < MIN_CSV_ROWS:
        raise DataError(f"{path}: need at least {MIN_CSV_ROWS} data rows, found {len(rows)}")
    for name in guide_columns:
        if name not in header:
            raise DataError(f"{path}: guide column {name!r} not found")
    if label_column is not None and label_column not in header:
        raise DataError(f"{path}: label column {label_column!r} not found")
    if label_column is not None and label_column in guide_columns:
        raise DataError(f"{path}: column {label_column!r} cannot be both guide and label")

    values = np.empty((len(rows), len(header)))
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"{path}: row {i + 2} has {len(row)} cells, header has {len(header)}")
        for j, cell in enumerate(row):
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: non-numeric cell at row {i + 2}, column {header[j]!r}: {cell!r}"
                ) from None

    guide_idx = [header.index(name) for name in guide_columns]
    label_idx = header.index(label_column) if label_column is not None else None
    feature_idx = [
        j for j in range(len(header)) if j not in guide_idx and j != label_idx
    ]

    labels = None
    if label_idx is not None:
        raw = values[:, label_idx]
        if not np.allclose(raw, np.round(raw)):
            raise DataError(f"{path}: label column {label_column!r} must hold integers")
        ints = np.round(raw).astype(np.int64)
        _, labels = np.unique(ints, return_inverse=True)  # densify to 0..C-1

    x, x_lo, x_hi = _minmax(values[:, feature_idx])
    y, y_lo, y_hi = _minmax(values[:, guide_idx]) if guide_idx else (
        np.zeros((len(rows), 0)), np.zeros(0), np.zeros(0))
    return Dataset(
        X=x,
        Y=y,
        labels=labels,
        feature_names=[header[j] for j in feature_idx],
        guide_names=list(guide_columns),
        x_min=x_lo,
        x_max=x_hi,
        y_min=y_lo,
        y_max=y_hi,
    )


def save_csv(dataset: Dataset, path, denormalize: bool = True) -> None:
    """Write features, guides and (when present) a ``label`` column.

    By default values are written in original units, so loading the file back
    reproduces the same normalized dataset.
    """
    x = dataset.denormalized_x() if denormalize else dataset.X
    y = dataset.denormalized_y() if denormalize else dataset.Y
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = list(dataset.feature_names) + list(dataset.guide_names)
        if dataset.labels is not None:
            header.append("label")
        writer.writerow(header)
        for i in range(dataset.n):
            row = [repr(float(v)) for v in x[i]] + [repr(float(v)) for v in y[i]]
            if dataset.labels is not None:
                row.append(str(int(dataset.labels[i])))
            writer.writerow(row)


def split(
    dataset: Dataset,
    fractions: tuple[float, float, float],
    seed: int,
) -> tuple[Dataset, Dataset, Dataset]:
    """Deterministic (train, val, test) split; stratified when labels exist.

    Sizes are floor-based with the remainder going to train. Stratification
    places each label's members evenly along the shuffle order, so any
    contiguous cut preserves label proportions.
    """
    if len(fractions) != 3:
        raise DataError("expected three split fractions")
    if any(f <= 0 for f in fractions):
        raise DataError("split fractions must be positive")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise DataError("split fractions must sum to 1")

    n = dataset.n
    rng = make_rng(seed, STREAM_SPLIT)
    if dataset.labels is None:
        order = rng.permutation(n)
    else:
        keys = np.empty(n)
        for lab in np.unique(dataset.labels):
            members = np.flatnonzero(dataset.labels == lab)
            perm = rng.permutation(members)
            jitter = rng.random()
            keys[perm] = (np.arange(members.size) + jitter) / members.size
        order = np.argsort(keys, kind="stable")

    n_val = int(np.floor(fractions[1] * n))
    n_test = int(np.floor(fractions[2] * n))
    n_train = n - n_val - n_test
    if min(n_train, n_val, n_test) < 1:
        raise DataError(f"split of {n} rows leaves an empty part")
    train_idx = order[:n_train]
    val_idx = order[n_train : n_train + n_val]
    test_idx = order[n_train + n_val :]
    return dataset.take(train_idx), dataset.take(val_idx), dataset.take(test_idx)
