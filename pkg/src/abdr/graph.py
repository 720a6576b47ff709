"""KNN fusion graph: Gaussian-kernel edge weights, node-arc incidence and
the column/row difference operators built on it."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import sparse

from .dataset import DataMatrix

DEFAULT_KNN_K = 10
DEFAULT_PHI = "auto"


class Edge(NamedTuple):
    i: int
    j: int
    weight: float


# Edges below this weight are dropped: their penalty contribution is dozens
# of orders of magnitude under every tolerance in the package, but carrying
# them through the solver breeds subnormal numbers that stall the BLAS.
WEIGHT_FLOOR = 1e-40


@dataclass
class WeightedGraph:
    """Undirected weighted edge set over n nodes with its incidence matrix.

    ``incidence`` is the n x |E| node-arc matrix whose column for edge
    (i, j) holds +1 at row i and -1 at row j; edge order in ``edges``
    matches the column order.  Instances are treated as immutable and may
    be shared across concurrent solves.
    """

    n: int
    edges: list
    incidence: sparse.csc_array
    knn_k: int
    phi: float
    heads: np.ndarray = field(init=False)
    tails: np.ndarray = field(init=False)
    weights: np.ndarray = field(init=False)

    def __post_init__(self):
        self.heads = np.array([e.i for e in self.edges], dtype=int)
        self.tails = np.array([e.j for e in self.edges], dtype=int)
        self.weights = np.array([e.weight for e in self.edges], dtype=float)

    @property
    def edge_count(self) -> int:
        return len(self.edges)


def _pairwise_sq_dists(values: np.ndarray) -> np.ndarray:
    sq = np.sum(values * values, axis=0)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (values.T @ values)
    np.maximum(d2, 0.0, out=d2)
    return d2


def build_knn_edges(X: DataMatrix, K: int) -> list:
    """Symmetrized K-nearest-neighbor pairs, canonicalized as i < j.

    A pair is kept when either endpoint lists the other among its K nearest
    neighbors.  Distance ties are broken toward the lower column index, so
    the edge set is a deterministic function of the data.
    """
    n = X.n
    if not 1 <= K < n:
        raise ValueError(f"K must satisfy 1 <= K < n (got K={K}, n={n})")
    d2 = _pairwise_sq_dists(X.values)
    np.fill_diagonal(d2, np.inf)
    pairs = set()
    order = np.arange(n)
    for i in range(n):
        nearest = np.lexsort((order, d2[i]))[:K]
        for j in nearest:
            pairs.add((min(i, int(j)), max(i, int(j))))
    return sorted(pairs)


def compute_weights(X: DataMatrix, pairs, phi) -> list:
    """Attach Gaussian-kernel weights exp(-phi * ||X_i - X_j||^2) to pairs.

    ``phi="auto"`` resolves to 1 / (2 * median of the squared pair
    distances); a zero median (duplicate-dominated data) falls back to
    phi = 0, i.e. uniform weights.  Edges whose weight falls below
    WEIGHT_FLOOR are dropped as numerically inert.
    """
    if not pairs:
        return []
    ii = np.array([p[0] for p in pairs], dtype=int)
    jj = np.array([p[1] for p in pairs], dtype=int)
    diffs = X.values[:, ii] - X.values[:, jj]
    d2 = np.sum(diffs * diffs, axis=0)
    phi = resolve_phi(phi, d2)
    w = np.exp(-phi * d2)
    return [Edge(int(i), int(j), float(wl))
            for i, j, wl in zip(ii, jj, w) if wl >= WEIGHT_FLOOR]


def resolve_phi(phi, sq_dists: np.ndarray) -> float:
    """Resolve the kernel bandwidth, applying the median heuristic for "auto"."""
    if isinstance(phi, str):
        if phi != "auto":
            raise ValueError(f"phi must be a number or 'auto' (got {phi!r})")
        med = float(np.median(sq_dists)) if sq_dists.size else 0.0
        return 1.0 / (2.0 * med) if med > 0.0 else 0.0
    phi = float(phi)
    if phi < 0:
        raise ValueError("phi must be nonnegative")
    return phi


def build_incidence(edges, n: int) -> sparse.csc_array:
    """Node-arc incidence matrix: +1 at the head, -1 at the tail per column."""
    m = len(edges)
    rows = np.empty(2 * m, dtype=int)
    data = np.empty(2 * m, dtype=float)
    for l, e in enumerate(edges):
        i, j = int(e[0]), int(e[1])
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"edge ({i}, {j}) has an endpoint outside 0..{n - 1}")
        rows[2 * l] = i
        rows[2 * l + 1] = j
        data[2 * l] = 1.0
        data[2 * l + 1] = -1.0
    cols = np.repeat(np.arange(m), 2)
    return sparse.csc_array((data, (rows, cols)), shape=(n, m))


def build_graph(X: DataMatrix, K: int = DEFAULT_KNN_K,
                phi=DEFAULT_PHI) -> WeightedGraph:
    """Compose KNN pairing, kernel weighting and incidence construction."""
    pairs = build_knn_edges(X, K)
    if pairs:
        ii = np.array([p[0] for p in pairs])
        jj = np.array([p[1] for p in pairs])
        diffs = X.values[:, ii] - X.values[:, jj]
        resolved = resolve_phi(phi, np.sum(diffs * diffs, axis=0))
    else:
        resolved = resolve_phi(phi, np.empty(0))
    edges = compute_weights(X, pairs, resolved)
    return WeightedGraph(n=X.n, edges=edges,
                         incidence=build_incidence(edges, X.n),
                         knn_k=K, phi=resolved)


def col_diffs(Z: np.ndarray, G: WeightedGraph) -> np.ndarray:
    """Column difference matrix Z Q; column l(i,j) equals Z_:i - Z_:j."""
    _check_square(Z, G)
    return Z[:, G.heads] - Z[:, G.tails]


def row_diffs(Z: np.ndarray, G: WeightedGraph) -> np.ndarray:
    """Row difference matrix Q^T Z; row l(i,j) equals Z_i: - Z_j:."""
    _check_square(Z, G)
    return Z[G.heads, :] - Z[G.tails, :]


def col_diffs_adjoint(M: np.ndarray, G: WeightedGraph) -> np.ndarray:
    """Adjoint of col_diffs: M Q^T, mapping n x |E| back to n x n."""
    return M @ G.incidence.T


def row_diffs_adjoint(M: np.ndarray, G: WeightedGraph) -> np.ndarray:
    """Adjoint of row_diffs: Q M, mapping |E| x n back to n x n."""
    return G.incidence @ M


def largest_singular_value(Q) -> float:
    """sigma_max of the incidence matrix (0 for an edgeless graph)."""
    if Q.shape[0] == 0 or Q.shape[1] == 0:
        return 0.0
    gram = Q @ Q.T
    if sparse.issparse(gram):
        gram = gram.toarray()
    lam = float(np.linalg.eigvalsh(gram)[-1])
    return float(np.sqrt(max(lam, 0.0)))


def save_edges_csv(G: WeightedGraph, path) -> None:
    """Dump the edge list as ``i,j,weight`` rows with 1-based indices."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for e in G.edges:
            writer.writerow([e.i + 1, e.j + 1, "%.17g" % e.weight])


def _check_square(Z: np.ndarray, G: WeightedGraph) -> None:
    if Z.shape != (G.n, G.n):
        raise ValueError(
            f"coefficient matrix must be {G.n} x {G.n}, got {Z.shape}")
