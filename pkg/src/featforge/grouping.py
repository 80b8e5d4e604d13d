"""Feature grouping: relevance/redundancy group distance and agglomerative merging.

Groups start as singletons and the closest pair is merged until the minimum
pairwise distance exceeds a threshold (or only 2 groups remain, since the
cascading agents need two selectable groups).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from featforge.measures import BinningSpec, DEFAULT_BINS, mi_matrix, mutual_information

DEFAULT_EPSILON = 1e-6


@dataclass(frozen=True)
class FeatureGroup:
    """A sorted, non-empty set of feature column indices."""

    indices: tuple[int, ...]

    def __post_init__(self):
        if not self.indices:
            raise ValueError("feature group must be non-empty")
        if list(self.indices) != sorted(set(self.indices)):
            object.__setattr__(self, "indices", tuple(sorted(set(self.indices))))

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class GroupPartition:
    groups: tuple[FeatureGroup, ...]
    threshold_used: float
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        seen: set[int] = set()
        for g in self.groups:
            if seen & set(g.indices):
                raise ValueError("groups must be pairwise disjoint")
            seen.update(g.indices)


def group_distance(
    c1: FeatureGroup,
    c2: FeatureGroup,
    features,
    target,
    epsilon: float = DEFAULT_EPSILON,
    spec: BinningSpec = DEFAULT_BINS,
) -> float:
    """Mean over cross pairs of |MI(f_i,y) - MI(f_j,y)| / (MI(f_i,f_j) + eps)."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    features = np.asarray(features, dtype=float)
    total = 0.0
    for i in c1.indices:
        for j in c2.indices:
            rel_i = mutual_information(features[:, i], target, spec)
            rel_j = mutual_information(features[:, j], target, spec)
            red = mutual_information(features[:, i], features[:, j], spec)
            total += abs(rel_i - rel_j) / (red + epsilon)
    return total / (len(c1) * len(c2))


def _distance_from_tables(
    g1: tuple[int, ...],
    g2: tuple[int, ...],
    pair_mi: np.ndarray,
    target_mi: np.ndarray,
    epsilon: float,
) -> float:
    rel_diff = np.abs(target_mi[np.array(g1)][:, None] - target_mi[np.array(g2)][None, :])
    red = pair_mi[np.ix_(g1, g2)]
    return float(np.mean(rel_diff / (red + epsilon)))


def _euclidean_group_distance(g1, g2, features: np.ndarray) -> float:
    """Ablation metric: Euclidean distance between group mean vectors."""
    v1 = features[:, list(g1)].mean(axis=1)
    v2 = features[:, list(g2)].mean(axis=1)
    return float(np.linalg.norm(v1 - v2))


def m_cluster(
    features,
    target,
    stop_threshold="auto",
    epsilon: float = DEFAULT_EPSILON,
    spec: BinningSpec = DEFAULT_BINS,
    metric: str = "relevance_redundancy",
) -> GroupPartition:
    """Agglomerative grouping under the group distance.

    Merging stops when the closest pair is farther apart than the threshold or
    when 2 groups remain.  ``stop_threshold="auto"`` uses the mean of the
    initial pairwise singleton distances.  Ties break toward the pair with the
    lexicographically smallest member indices, so results are deterministic.
    """
    features = np.asarray(features, dtype=float)
    target = np.asarray(target, dtype=float)
    if features.ndim != 2 or features.shape[1] == 0:
        raise ValueError("need at least one feature column")
    n = features.shape[1]
    if n == 1:
        return GroupPartition(
            groups=(FeatureGroup((0,)),), threshold_used=0.0, epsilon=epsilon
        )

    if metric == "relevance_redundancy":
        pair_mi, target_mi = mi_matrix(features, target, spec)

        def dist(g1, g2):
            return _distance_from_tables(g1, g2, pair_mi, target_mi, epsilon)

    elif metric == "euclidean":

        def dist(g1, g2):
            return _euclidean_group_distance(g1, g2, features)

    else:
        raise ValueError(f"unknown metric {metric!r}")

    groups: list[tuple[int, ...]] = [(i,) for i in range(n)]

    initial = [
        dist(groups[a], groups[b]) for a in range(n) for b in range(a + 1, n)
    ]
    if stop_threshold == "auto":
        threshold = float(np.mean(initial))
    else:
        threshold = float(stop_threshold)

    while len(groups) > 2:
        best = None
        best_key = None
        for a in range(len(groups)):
            for b in range(a + 1, len(groups)):
                d = dist(groups[a], groups[b])
                key = (d, min(groups[a]), min(groups[b]))
                if best_key is None or key < best_key:
                    best_key = key
                    best = (a, b)
        assert best is not None and best_key is not None
        if best_key[0] > threshold:
            break
        a, b = best
        merged = tuple(sorted(groups[a] + groups[b]))
        groups = [g for i, g in enumerate(groups) if i not in (a, b)]
        groups.append(merged)
        groups.sort(key=lambda g: g[0])

    return GroupPartition(
        groups=tuple(FeatureGroup(g) for g in sorted(groups, key=lambda g: g[0])),
        threshold_used=threshold,
        epsilon=epsilon,
    )


def group_relevance(
    c: FeatureGroup, features, target, spec: BinningSpec = DEFAULT_BINS
) -> float:
    """Mean MI between the group's features and the target."""
    features = np.asarray(features, dtype=float)
    vals = [mutual_information(features[:, i], target, spec) for i in c.indices]
    return float(np.mean(vals))
