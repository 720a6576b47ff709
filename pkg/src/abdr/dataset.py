"""Synthetic subspace datasets and matrix ingestion.

Data matrices are d x n with samples in columns. The two-line examples put
samples from the same subspace in contiguous columns, so a perfect
self-expression coefficient matrix is literally block diagonal.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

# Coordinate windows for the line coordinates of the three toy examples.
# Each is one-sided (strictly positive): sampling both signs of a line puts
# the two antipodal point clouds of one subspace farther apart than clouds
# of different subspaces, so no KNN graph can keep a subspace connected
# without bridging subspaces.  The offsets/widths are tuned so that, at the
# library defaults (K=10, phi=auto, mu=1, relative block threshold 1e-3),
# the solved coefficient matrix recovers exactly two blocks:
#   - example 1: orthogonal lines; any well-separated window works.
#   - example 2: the lines meet at 26.57 deg, so block-exact solutions need
#     the within-line coordinate spread to fuse completely at gamma ~ 1;
#     a narrow window keeps the fusion total and the recovery exact.
#   - example 3: the fixed noise std of 0.1 must stay small against the
#     within-line point spacing (else the noisy points decouple from the
#     fusion graph), which forces a wide, far-out window.
EXAMPLE1_COORDS = (2.0, 3.0)
EXAMPLE2_COORDS = (2.0, 2.02)
EXAMPLE3_COORDS = (300.0, 400.0)

EXAMPLE3_NOISE_STD = 0.1
EXAMPLE3_NOISY_RATE = 0.2


@dataclass(frozen=True)
class DataMatrix:
    """Observed sample matrix, features in rows and samples in columns."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2 or vals.shape[0] < 1 or vals.shape[1] < 1:
            raise ValueError("data matrix must be 2-dimensional and non-empty")
        if not np.all(np.isfinite(vals)):
            r, c = np.argwhere(~np.isfinite(vals))[0]
            raise ValueError(f"non-finite value at row {r + 1}, column {c + 1}")
        norms = np.linalg.norm(vals, axis=0)
        if np.any(norms == 0.0):
            c = int(np.flatnonzero(norms == 0.0)[0])
            raise ValueError(f"column {c + 1} is all-zero")
        object.__setattr__(self, "values", vals)

    @property
    def d(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class LabeledDataset:
    """A data matrix together with ground-truth subspace labels in {1..k}."""

    data: DataMatrix
    truth: np.ndarray
    subspace_count: int

    def __post_init__(self):
        truth = np.asarray(self.truth, dtype=int)
        if truth.ndim != 1 or truth.size != self.data.n:
            raise ValueError("label vector must have one entry per column")
        k = self.subspace_count
        present = np.unique(truth)
        if present.min() < 1 or present.max() > k or present.size != k:
            raise ValueError(f"labels must cover every value in 1..{k}")
        object.__setattr__(self, "truth", truth)


def _two_line_dataset(seed: int, window: tuple[float, float],
                      counts: tuple[int, int], directions) -> LabeledDataset:
    rng = np.random.default_rng(seed)
    cols = []
    labels = []
    for label, (m, direction) in enumerate(zip(counts, directions), start=1):
        t = rng.uniform(window[0], window[1], size=m)
        cols.append(direction(t))
        labels.extend([label] * m)
    X = np.hstack(cols)
    return LabeledDataset(DataMatrix(X), np.array(labels), len(counts))


def gen_example1(seed: int) -> LabeledDataset:
    """Two 1D lines in the plane: 20 points on y = x, 10 points on y = -x."""
    return _two_line_dataset(
        seed, EXAMPLE1_COORDS,
        (20, 10),
        (lambda t: np.vstack([t, t]), lambda t: np.vstack([t, -t])),
    )


def gen_example2(seed: int) -> LabeledDataset:
    """Two noise-free 1D lines: 20 points on y = 0, 10 points on y = x/2."""
    return _two_line_dataset(
        seed, EXAMPLE2_COORDS,
        (20, 10),
        (lambda t: np.vstack([t, np.zeros_like(t)]),
         lambda t: np.vstack([t, t * 0.5])),
    )


def gen_example3(seed: int, noise_std: float = EXAMPLE3_NOISE_STD) -> LabeledDataset:
    """Two 1D lines (40 points on y = 0, 40 on y = x/2) with partial noise.

    A fixed fraction (20%) of the 80 columns, chosen uniformly without
    replacement, is perturbed by zero-mean isotropic Gaussian noise with the
    given per-coordinate standard deviation.  With ``noise_std=0`` the output
    is bit-identical to the clean construction.
    """
    clean = _two_line_dataset(
        seed, EXAMPLE3_COORDS,
        (40, 40),
        (lambda t: np.vstack([t, np.zeros_like(t)]),
         lambda t: np.vstack([t, t * 0.5])),
    )
    X = clean.data.values.copy()
    n = X.shape[1]
    # Independent stream for the corruption so the clean draws above are
    # untouched by the noise settings.
    rng = np.random.default_rng((seed, 1))
    noisy = rng.choice(n, size=int(EXAMPLE3_NOISY_RATE * n), replace=False)
    X[:, noisy] += noise_std * rng.standard_normal((2, noisy.size))
    return LabeledDataset(DataMatrix(X), clean.truth, clean.subspace_count)


def gen_subspaces(k: int, ambient_dim: int, sub_dims, counts,
                  noise_std: float, seed: int) -> LabeledDataset:
    """Sample unit-norm points from k mutually independent linear subspaces.

    Per subspace an orthonormal basis is drawn so that all spans are
    pairwise orthogonal (hence independent); points are standard-normal
    combinations of the basis, perturbed by isotropic Gaussian noise of the
    given standard deviation and normalized to unit length.

    Parameters
    ----------
    k : int
        Number of subspaces.
    ambient_dim : int
        Dimension of the ambient space.
    sub_dims : sequence of int
        Dimension of each subspace; their sum must not exceed ambient_dim.
    counts : sequence of int
        Points per subspace; counts[i] >= sub_dims[i].
    noise_std : float
        Standard deviation of the additive noise (0 for clean data).
    seed : int
        Seed for the generator; identical inputs give identical outputs.
    """
    sub_dims = list(sub_dims)
    counts = list(counts)
    if len(sub_dims) != k or len(counts) != k:
        raise ValueError("sub_dims and counts must have one entry per subspace")
    if min(sub_dims) < 1 or ambient_dim < 1:
        raise ValueError("dimensions must be positive")
    if sum(sub_dims) > ambient_dim:
        raise ValueError(
            f"sum of subspace dimensions {sum(sub_dims)} exceeds ambient "
            f"dimension {ambient_dim}; independence cannot be guaranteed")
    if any(c < d for c, d in zip(counts, sub_dims)):
        raise ValueError("each subspace needs at least as many points as dimensions")
    if noise_std < 0:
        raise ValueError("noise_std must be nonnegative")

    rng = np.random.default_rng(seed)
    basis, _ = np.linalg.qr(rng.standard_normal((ambient_dim, sum(sub_dims))))
    cols = []
    labels = []
    offset = 0
    for label, (dim, m) in enumerate(zip(sub_dims, counts), start=1):
        B = basis[:, offset:offset + dim]
        offset += dim
        cols.append(B @ rng.standard_normal((dim, m)))
        labels.extend([label] * m)
    X = np.hstack(cols)
    X = X + noise_std * rng.standard_normal(X.shape)
    X = X / np.linalg.norm(X, axis=0, keepdims=True)
    return LabeledDataset(DataMatrix(X), np.array(labels), k)


def load_csv(path, header: bool = False) -> DataMatrix:
    """Parse a rectangular numeric CSV (rows = features, columns = samples)."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        if header:
            next(reader, None)
        for lineno, fields in enumerate(reader, start=2 if header else 1):
            if not fields:
                continue
            if rows and len(fields) != len(rows[0]):
                raise ValueError(
                    f"{path}: row {lineno} has {len(fields)} fields, "
                    f"expected {len(rows[0])}")
            parsed = []
            for col, tok in enumerate(fields, start=1):
                try:
                    val = float(tok)
                except ValueError:
                    raise ValueError(
                        f"{path}: cannot parse {tok!r} at row {lineno}, "
                        f"column {col}") from None
                if not np.isfinite(val):
                    raise ValueError(
                        f"{path}: non-finite value {tok!r} at row {lineno}, "
                        f"column {col}")
                parsed.append(val)
            rows.append(parsed)
    if not rows:
        raise ValueError(f"{path}: file contains no data rows")
    return DataMatrix(np.array(rows))


def load_labels_csv(path) -> np.ndarray:
    """Parse a one-column CSV of integer labels."""
    labels = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            tok = line.strip()
            if not tok:
                continue
            try:
                labels.append(int(float(tok)))
            except ValueError:
                raise ValueError(
                    f"{path}: cannot parse label {tok!r} at row {lineno}") from None
    if not labels:
        raise ValueError(f"{path}: file contains no labels")
    return np.array(labels, dtype=int)


def normalize_columns(X: DataMatrix) -> DataMatrix:
    """Rescale every column to unit Euclidean length."""
    norms = np.linalg.norm(X.values, axis=0)
    if np.any(norms == 0.0):
        c = int(np.flatnonzero(norms == 0.0)[0])
        raise ValueError(f"column {c + 1} is all-zero and cannot be normalized")
    return DataMatrix(X.values / norms)


def save_csv(values: np.ndarray, path) -> None:
    """Write a dense matrix as comma-separated rows (full double precision)."""
    np.savetxt(path, np.atleast_2d(values), fmt="%.17g", delimiter=",")


def save_labels(labels: np.ndarray, path) -> None:
    """Write a one-column CSV of integer labels."""
    np.savetxt(path, np.asarray(labels, dtype=int), fmt="%d")
