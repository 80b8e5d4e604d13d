"""Information-theoretic and statistical kernels.

All quantities are in nats.  Mutual information is a plug-in estimate over
equal-frequency discretized joint counts; the bin count is
min(max_bins, max(2, floor(sqrt(m)))).  Every function here is pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_NEG_TOL = 1e-12


@dataclass(frozen=True)
class BinningSpec:
    max_bins: int = 16

    def __post_init__(self):
        if self.max_bins < 2:
            raise ValueError("max_bins must be >= 2")


DEFAULT_BINS = BinningSpec()


@dataclass(frozen=True)
class StatVector7:
    """count, std, min, max, q1, q2, q3 of a vector."""

    count: float
    std: float
    min: float
    max: float
    q1: float
    q2: float
    q3: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.count, self.std, self.min, self.max, self.q1, self.q2, self.q3]
        )


def _check_vector(x, name="x") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise ValueError(f"{name} must be non-empty")
    return x.ravel()


def discretize(x, spec: BinningSpec = DEFAULT_BINS) -> np.ndarray:
    """Map a real vector to integer bin labels.

    Vectors with <= max_bins distinct values keep one label per distinct value
    (ranked).  Otherwise equal-frequency binning is used; a value equal to a
    bin boundary goes to the lower bin.
    """
    x = _check_vector(x)
    distinct = np.unique(x)
    if len(distinct) <= spec.max_bins:
        return np.searchsorted(distinct, x)
    n_bins = min(spec.max_bins, max(2, int(np.floor(np.sqrt(len(x))))))
    edges = np.quantile(x, np.arange(1, n_bins) / n_bins)
    return np.searchsorted(edges, x, side="left")


def entropy(x, spec: BinningSpec = DEFAULT_BINS) -> float:
    """Plug-in Shannon entropy (nats) over discretized counts."""
    labels = discretize(x, spec)
    _, counts = np.unique(labels, return_counts=True)
    p = counts / counts.sum()
    return float(-np.sum(p * np.log(p)))


def mutual_information(x, y, spec: BinningSpec = DEFAULT_BINS) -> float:
    """Plug-in mutual information (nats) between two real vectors."""
    x = _check_vector(x)
    y = _check_vector(y, "y")
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise ValueError("need at least 2 samples")
    lx = discretize(x, spec)
    ly = discretize(y, spec)
    nx = lx.max() + 1
    ny = ly.max() + 1
    joint = np.zeros((nx, ny))
    np.add.at(joint, (lx, ly), 1.0)
    joint /= joint.sum()
    px = joint.sum(axis=1)
    py = joint.sum(axis=0)
    nz = joint > 0
    outer = np.outer(px, py)
    mi = float(np.sum(joint[nz] * np.log(joint[nz] / outer[nz])))
    if -_NEG_TOL <= mi < 0:
        mi = 0.0
    return mi


def utility_u(
    features,
    target,
    spec: BinningSpec = DEFAULT_BINS,
    include_self_redundancy: bool = True,
) -> float:
    """Feature-set utility: mean target relevance minus mean pairwise redundancy.

    U = -(1/n^2) * sum_{i,j} MI(f_i, f_j) + (1/n) * sum_i MI(f_i, y).
    The redundancy double sum includes i=j by default; set
    ``include_self_redundancy=False`` to drop the diagonal.
    """
    features = np.asarray(features, dtype=float)
    if features.ndim == 1:
        features = features[:, None]
    target = _check_vector(target, "target")
    m, n = features.shape
    if m != len(target):
        raise ValueError("feature rows must match target length")
    mi_y = np.array([mutual_information(features[:, i], target, spec) for i in range(n)])
    redundancy = 0.0
    for i in range(n):
        for j in range(i, n):
            mij = mutual_information(features[:, i], features[:, j], spec)
            if i == j:
                if include_self_redundancy:
                    redundancy += mij
            else:
                redundancy += 2.0 * mij
    return float(-redundancy / n**2 + mi_y.mean())


def mi_matrix(features, target, spec: BinningSpec = DEFAULT_BINS):
    """All pairwise MI(f_i, f_j) plus MI(f_i, y), discretizing each column once.

    Returns (pair_mi: n x n symmetric matrix, target_mi: length-n vector).
    """
    features = np.asarray(features, dtype=float)
    target = _check_vector(target, "target")
    m, n = features.shape
    labels = [discretize(features[:, i], spec) for i in range(n)]
    ly = discretize(target, spec)

    def _mi(la, lb) -> float:
        joint = np.zeros((la.max() + 1, lb.max() + 1))
        np.add.at(joint, (la, lb), 1.0)
        joint /= joint.sum()
        pa = joint.sum(axis=1)
        pb = joint.sum(axis=0)
        nz = joint > 0
        outer = np.outer(pa, pb)
        v = float(np.sum(joint[nz] * np.log(joint[nz] / outer[nz])))
        return 0.0 if -_NEG_TOL <= v < 0 else v

    pair = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            pair[i, j] = pair[j, i] = _mi(labels[i], labels[j])
    target_mi = np.array([_mi(labels[i], ly) for i in range(n)])
    return pair, target_mi


def cosine_similarity(x, y) -> float:
    """dot(x, y) / (|x| |y|); 0 when either norm is 0."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if len(x) != len(y):
        raise ValueError("length mismatch")
    nx = np.linalg.norm(x)
    ny = np.linalg.norm(y)
    if nx == 0.0 or ny == 0.0:
        return 0.0
    return float(np.dot(x, y) / (nx * ny))


def pearson_abs(x, y) -> float:
    """Absolute Pearson correlation; 0 if either vector is constant."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if len(x) != len(y):
        raise ValueError("length mismatch")
    if len(x) < 2:
        raise ValueError("need at least 2 samples")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = np.sqrt(np.sum(xc**2))
    sy = np.sqrt(np.sum(yc**2))
    if sx == 0.0 or sy == 0.0:
        return 0.0
    r = np.dot(xc, yc) / (sx * sy)
    return float(min(abs(r), 1.0))


def descriptive_stats(x) -> StatVector7:
    """count / std / min / max / quartiles (linear-interpolation quantiles)."""
    x = _check_vector(x)
    n = len(x)
    std = float(np.std(x, ddof=1)) if n > 1 else 0.0
    q1, q2, q3 = np.quantile(x, [0.25, 0.5, 0.75])
    return StatVector7(
        count=float(n),
        std=std,
        min=float(x.min()),
        max=float(x.max()),
        q1=float(q1),
        q2=float(q2),
        q3=float(q3),
    )
