"""Affinity construction, adaptive block counting and spectral clustering."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from sklearn.cluster import KMeans

from .dataset import DataMatrix
from .graph import WeightedGraph
from .solver import SolveTrace, SolverConfig, solve_abdr

DEFAULT_REL_THRESHOLD = 1e-3

# Degrees are floored here before inverting, so fully disconnected nodes get
# an identity row in the normalized Laplacian instead of a division by zero.
DEGREE_FLOOR = 1e-12


def affinity(Z: np.ndarray) -> np.ndarray:
    """Symmetric nonnegative affinity (|Z| + |Z^T|) / 2."""
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2 or Z.shape[0] != Z.shape[1]:
        raise ValueError(f"coefficient matrix must be square, got {Z.shape}")
    absz = np.abs(Z)
    return (absz + absz.T) / 2.0


def estimate_block_count(W: np.ndarray, rel_threshold: float = DEFAULT_REL_THRESHOLD) -> int:
    """Number of connected components of the thresholded affinity graph.

    Nodes i != j are joined when W_ij exceeds rel_threshold * max(W); an
    all-zero affinity therefore reports n isolated blocks.
    """
    if not 0.0 < rel_threshold < 1.0:
        raise ValueError("rel_threshold must lie strictly between 0 and 1")
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    top = float(W.max()) if W.size else 0.0
    if top <= 0.0:
        return n
    adj = W > rel_threshold * top
    np.fill_diagonal(adj, False)
    count, _ = connected_components(sparse.csr_array(adj), directed=False)
    return int(count)


def _kmeans_seed(seed: int) -> int:
    return int(np.random.SeedSequence(seed).generate_state(1)[0])


def spectral_cluster(W: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Normalized-Laplacian spectral clustering into k groups (labels 1..k).

    Embeds the nodes with the eigenvectors of the k smallest eigenvalues of
    L_sym = I - D^{-1/2} W D^{-1/2}, row-normalizes the embedding (rows of
    zero norm are left zero) and runs k-means with k-means++ seeding,
    10 restarts and 300 iterations, keeping the best-inertia assignment.
    """
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must satisfy 1 <= k <= n (got k={k}, n={n})")
    if k == 1:
        return np.ones(n, dtype=int)
    deg = np.maximum(W.sum(axis=1), DEGREE_FLOOR)
    inv_sqrt = 1.0 / np.sqrt(deg)
    lap = -W * inv_sqrt[:, None] * inv_sqrt[None, :]
    lap[np.diag_indices(n)] += 1.0
    _, vecs = np.linalg.eigh(lap)
    emb = vecs[:, :k]
    norms = np.linalg.norm(emb, axis=1)
    nonzero = norms > 0
    emb[nonzero] /= norms[nonzero, None]
    km = KMeans(n_clusters=k, init="k-means++", n_init=10, max_iter=300,
                random_state=_kmeans_seed(seed))
    return km.fit_predict(emb).astype(int) + 1


class PipelineResult(NamedTuple):
    Z: np.ndarray
    labels: np.ndarray
    estimated_k: int
    trace: SolveTrace


def cluster_pipeline(X: DataMatrix, G: WeightedGraph, config: SolverConfig,
                     k="auto", seed: int = 0,
                     rel_threshold: float = DEFAULT_REL_THRESHOLD,
                     gram=None) -> PipelineResult:
    """Solve for Z, derive the affinity, pick k (unless given) and cluster."""
    Z, trace = solve_abdr(X, G, config, gram=gram)
    W = affinity(Z)
    if isinstance(k, str):
        if k != "auto":
            raise ValueError(f"k must be an integer or 'auto' (got {k!r})")
        k_val = estimate_block_count(W, rel_threshold)
    else:
        k_val = int(k)
    labels = spectral_cluster(W, k_val, seed)
    return PipelineResult(Z=Z, labels=labels, estimated_k=k_val, trace=trace)


def save_pgm(W: np.ndarray, path) -> None:
    """Write an 8-bit grayscale heatmap of W, scaled by its maximum."""
    W = np.asarray(W, dtype=float)
    top = float(W.max()) if W.size else 0.0
    if top > 0.0:
        img = np.rint(255.0 * W / top).astype(np.uint8)
    else:
        img = np.zeros(W.shape, dtype=np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())
