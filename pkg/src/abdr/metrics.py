"""Clustering-quality metrics: optimally matched error and block fidelity."""

from __future__ import annotations

import json

import numpy as np
from scipy.optimize import linear_sum_assignment


def contingency_table(pred, truth):
    """Count matrix between predicted and true labels.

    Returns (counts, pred_values, truth_values) where counts[a, b] is the
    number of points with predicted label pred_values[a] and true label
    truth_values[b].
    """
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    pv, pi = np.unique(pred, return_inverse=True)
    tv, ti = np.unique(truth, return_inverse=True)
    counts = np.zeros((pv.size, tv.size), dtype=int)
    np.add.at(counts, (pi, ti), 1)
    return counts, pv, tv


def clustering_error(pred, truth) -> float:
    """Fraction of points misassigned under the best label matching.

    The predicted label set is mapped injectively onto the true label set by
    maximum-weight bipartite matching on the contingency table; with unequal
    label counts the matching covers the smaller side and every point whose
    labels are left unmatched counts as an error.
    """
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise ValueError("label vectors must be 1-dimensional and equally long")
    if pred.size == 0:
        raise ValueError("label vectors must be non-empty")
    counts, _, _ = contingency_table(pred, truth)
    rows, cols = linear_sum_assignment(counts, maximize=True)
    matched = int(counts[rows, cols].sum())
    return 1.0 - matched / pred.size


def off_block_mass(Z: np.ndarray, truth) -> float:
    """Fraction of |Z| mass lying outside the ground-truth diagonal blocks."""
    Z = np.asarray(Z, dtype=float)
    truth = np.asarray(truth)
    n = truth.size
    if Z.shape != (n, n):
        raise ValueError(f"coefficient matrix must be {n} x {n}, got {Z.shape}")
    absz = np.abs(Z)
    total = absz.sum()
    if total == 0.0:
        return 0.0
    cross = truth[:, None] != truth[None, :]
    return float(absz[cross].sum() / total)


def metrics_report(clustering_err, off_block, estimated_k, true_k,
                   iterations, final_objective) -> str:
    """Serialize the metric bundle as deterministic JSON."""
    payload = {
        "clustering_error": clustering_err,
        "off_block_mass": off_block,
        "estimated_k": estimated_k,
        "true_k": true_k,
        "iterations": iterations,
        "final_objective": final_objective,
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"
