"""Clustering metrics: optimally matched accuracy, normalized mutual
information, and per-cluster profile tables in original units."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .data import Dataset


def contingency_table(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Square count matrix (padded with zero rows/cols when label counts differ).

    Rows index the dense predicted labels, columns the dense true labels.
    """
    pred = np.asarray(pred).ravel()
    truth = np.asarray(truth).ravel()
    if pred.size == 0 or truth.size == 0:
        raise ValueError("empty label vectors")
    if pred.size != truth.size:
        raise ValueError(f"length mismatch: {pred.size} predictions vs {truth.size} labels")
    _, pred_ids = np.unique(pred, return_inverse=True)
    _, true_ids = np.unique(truth, return_inverse=True)
    k = max(pred_ids.max(), true_ids.max()) + 1
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (pred_ids, true_ids), 1)
    return counts


def hungarian(cost: np.ndarray) -> np.ndarray:
    """Minimum-total-cost assignment of rows to columns (a permutation)."""
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ValueError(f"cost matrix must be square, got {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix must be finite")
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(cost.shape[0], dtype=np.int64)
    perm[rows] = cols
    return perm


def clustering_accuracy(pred: np.ndarray, truth: np.ndarray) -> float:
    """Accuracy after the best one-to-one relabeling of predicted clusters."""
    counts = contingency_table(pred, truth)
    perm = hungarian(-counts.astype(np.float64))
    matched = counts[np.arange(counts.shape[0]), perm].sum()
    return float(matched) / float(np.asarray(pred).ravel().size)


def nmi(pred: np.ndarray, truth: np.ndarray) -> float:
    """Mutual information normalized by the arithmetic mean of the entropies.

    When both labelings are single-cluster the score is 1.0 by convention
    (they agree perfectly, if trivially).
    """
    counts = contingency_table(pred, truth).astype(np.float64)
    n = counts.sum()
    joint = counts / n
    p_pred = joint.sum(axis=1)
    p_true = joint.sum(axis=0)

    def entropy(p: np.ndarray) -> float:
        p = p[p > 0]
        return float(-np.sum(p * np.log(p)))

    h_pred, h_true = entropy(p_pred), entropy(p_true)
    if h_pred == 0.0 and h_true == 0.0:
        return 1.0
    mask = joint > 0
    outer = np.outer(p_pred, p_true)
    mi = float(np.sum(joint[mask] * np.log(joint[mask] / outer[mask])))
    value = mi / (0.5 * (h_pred + h_true))
    return float(np.clip(value, 0.0, 1.0))


@dataclass
class ClusterProfile:
    """Per-cluster counts and per-column mean/std in original units."""

    cluster_ids: list[int]
    counts: list[int]
    columns: list[str]
    means: np.ndarray  # (clusters, columns); NaN for empty clusters
    stds: np.ndarray


def cluster_profiles(dataset: Dataset, assignments: np.ndarray) -> ClusterProfile:
    """Denormalized mean and standard deviation of every feature and guide
    column, per assigned cluster. Empty clusters get a zero count and blank
    (NaN) statistics."""
    assignments = np.asarray(assignments).ravel()
    if assignments.size != dataset.n:
        raise ValueError(
            f"got {assignments.size} assignments for {dataset.n} rows"
        )
    table = np.concatenate([dataset.denormalized_x(), dataset.denormalized_y()], axis=1)
    columns = list(dataset.feature_names) + list(dataset.guide_names)
    cluster_ids = list(range(int(assignments.max()) + 1)) if assignments.size else []
    means = np.full((len(cluster_ids), table.shape[1]), np.nan)
    stds = np.full_like(means, np.nan)
    counts = []
    for c in cluster_ids:
        members = table[assignments == c]
        counts.append(members.shape[0])
        if members.shape[0] > 0:
            means[c] = members.mean(axis=0)
            stds[c] = members.std(axis=0)
    return ClusterProfile(cluster_ids, counts, columns, means, stds)


def profile_to_csv(profile: ClusterProfile) -> str:
    lines = ["cluster,count," + ",".join(
        f"{c}_mean,{c}_std" for c in profile.columns)]
    for i, cid in enumerate(profile.cluster_ids):
        cells = [str(cid), str(profile.counts[i])]
        for j in range(len(profile.columns)):
            m, s = profile.means[i, j], profile.stds[i, j]
            cells.append("" if np.isnan(m) else repr(float(m)))
            cells.append("" if np.isnan(s) else repr(float(s)))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def profile_to_text(profile: ClusterProfile) -> str:
    """Aligned table with one `mean ± std` cell per cluster and column."""
    headers = ["column"] + [
        f"cluster {cid} (n={n})" for cid, n in zip(profile.cluster_ids, profile.counts)
    ]
    rows = [headers]
    for j, col in enumerate(profile.columns):
        row = [col]
        for i in range(len(profile.cluster_ids)):
            m, s = profile.means[i, j], profile.stds[i, j]
            row.append("-" if np.isnan(m) else f"{m:.3f} ± {s:.3f}")
        rows.append(row)
    widths = [max(len(r[k]) for r in rows) for k in range(len(headers))]
    out = []
    for r in rows:
        out.append("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())
    return "\n".join(out) + "\n"
