import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from featforge.measures import (
    BinningSpec,
    cosine_similarity,
    descriptive_stats,
    discretize,
    entropy,
    mi_matrix,
    mutual_information,
    pearson_abs,
    utility_u,
)


def plugin_mi(lx, ly):
    """Independent joint-count plug-in oracle over integer labels."""
    lx = np.asarray(lx)
    ly = np.asarray(ly)
    total = 0.0
    m = len(lx)
    for a in np.unique(lx):
        for b in np.unique(ly):
            pab = np.mean((lx == a) & (ly == b))
            if pab == 0:
                continue
            total += pab * np.log(pab / (np.mean(lx == a) * np.mean(ly == b)))
    return total


class TestDiscretize:
    def test_distinct_value_rule(self):
        assert np.array_equal(discretize([0, 0, 1, 1]), [0, 0, 1, 1])

    def test_constant(self):
        assert np.array_equal(discretize([5, 5, 5]), [0, 0, 0])

    def test_rank_mapping(self):
        assert np.array_equal(discretize([30, 10, 20]), [2, 0, 1])

    def test_equal_frequency_100_uniform(self):
        rng = np.random.default_rng(42)
        x = rng.uniform(size=100)
        labels = discretize(x, BinningSpec(max_bins=4))
        _, counts = np.unique(labels, return_counts=True)
        assert np.array_equal(counts, [25, 25, 25, 25])

    def test_boundary_goes_to_lower_bin(self):
        x = np.concatenate([np.arange(100, dtype=float), [74.0]])
        spec = BinningSpec(max_bins=4)
        labels = discretize(x, spec)
        edges = np.quantile(x, [0.25, 0.5, 0.75])
        on_edge = np.flatnonzero(x == edges[2])
        assert len(on_edge) > 0
        assert np.all(labels[on_edge] == 2)

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            discretize([])

    def test_bin_count_formula(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(size=50)
        labels = discretize(x)
        assert labels.max() + 1 == min(16, max(2, int(np.floor(np.sqrt(50)))))


class TestEntropy:
    def test_two_equiprobable(self):
        assert abs(entropy([0, 0, 1, 1]) - np.log(2)) < 1e-12

    def test_constant(self):
        assert entropy([7, 7, 7, 7]) == 0.0

    def test_three_one_split(self):
        expected = -(0.75 * np.log(0.75) + 0.25 * np.log(0.25))
        value = entropy([0, 0, 0, 1])
        assert abs(value - expected) < 1e-12
        assert abs(value - 0.5623351446188083) < 1e-12


class TestMutualInformation:
    def test_self_is_entropy(self):
        x = [0, 0, 1, 1]
        assert abs(mutual_information(x, x) - np.log(2)) < 1e-12

    def test_independent(self):
        assert mutual_information([0, 0, 1, 1], [0, 1, 0, 1]) == 0.0

    def test_derived_value(self):
        value = mutual_information([0, 0, 1, 1], [0, 0, 0, 1])
        assert abs(value - plugin_mi([0, 0, 1, 1], [0, 0, 0, 1])) < 1e-12
        assert abs(value - 0.21576155433883565) < 1e-12

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            mutual_information([1, 2], [1, 2, 3])

    def test_single_sample_rejected(self):
        with pytest.raises(ValueError):
            mutual_information([1.0], [1.0])

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_symmetry(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=40)
        y = rng.normal(size=40)
        assert abs(mutual_information(x, y) - mutual_information(y, x)) < 1e-12

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_bounds(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.integers(0, 4, size=60).astype(float)
        y = rng.integers(0, 3, size=60).astype(float)
        mi = mutual_information(x, y)
        assert mi >= 0.0
        assert mi <= min(entropy(x), entropy(y)) + 1e-9

    def test_mi_xx_equals_entropy_discrete(self):
        rng = np.random.default_rng(3)
        x = rng.integers(0, 5, size=80).astype(float)
        assert abs(mutual_information(x, x) - entropy(x)) < 1e-12


def brute_force_utility(features, target):
    features = np.asarray(features, dtype=float)
    n = features.shape[1]
    red = sum(
        mutual_information(features[:, i], features[:, j])
        for i in range(n)
        for j in range(n)
    )
    rel = sum(mutual_information(features[:, i], target) for i in range(n))
    return -red / n**2 + rel / n


class TestUtilityU:
    def test_single_feature_identity(self):
        rng = np.random.default_rng(1)
        f = rng.normal(size=50)
        y = rng.integers(0, 2, size=50).astype(float)
        expected = mutual_information(f, y) - entropy(f)
        assert abs(utility_u(f, y) - expected) < 1e-12

    def test_feature_equals_target(self):
        y = np.array([0.0, 1.0] * 10)
        assert abs(utility_u(y, y)) < 1e-12

    def test_duplicate_feature_utility(self):
        rng = np.random.default_rng(2)
        f = rng.normal(size=60)
        y = rng.normal(size=60)
        assert entropy(f) > 0
        # With the diagonal included, duplication is exactly neutral: the
        # redundancy term stays H(f) and the relevance term stays MI(f, y).
        single = utility_u(f[:, None], y)
        doubled = utility_u(np.column_stack([f, f]), y)
        assert abs(doubled - single) < 1e-12
        # With the diagonal excluded it is a strict penalty.
        single_x = utility_u(f[:, None], y, include_self_redundancy=False)
        doubled_x = utility_u(
            np.column_stack([f, f]), y, include_self_redundancy=False
        )
        assert doubled_x < single_x

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        features = rng.normal(size=(30, 3))
        target = rng.normal(size=30)
        assert abs(utility_u(features, target) - brute_force_utility(features, target)) < 1e-12

    def test_exclude_self_redundancy_switch(self):
        rng = np.random.default_rng(4)
        features = rng.normal(size=(40, 2))
        target = rng.normal(size=40)
        with_diag = utility_u(features, target)
        without = utility_u(features, target, include_self_redundancy=False)
        diag = sum(
            mutual_information(features[:, i], features[:, i]) for i in range(2)
        )
        assert abs((without - with_diag) - diag / 4) < 1e-12

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            utility_u(np.ones((5, 2)), np.ones(4))


class TestMiMatrix:
    def test_matches_pairwise_calls(self):
        rng = np.random.default_rng(5)
        features = rng.normal(size=(40, 4))
        target = rng.normal(size=40)
        pair, rel = mi_matrix(features, target)
        for i in range(4):
            for j in range(4):
                direct = mutual_information(features[:, i], features[:, j])
                assert abs(pair[i, j] - direct) < 1e-12
            assert abs(rel[i] - mutual_information(features[:, i], target)) < 1e-12
        assert np.allclose(pair, pair.T)


class TestCosineSimilarity:
    def test_identical(self):
        assert abs(cosine_similarity([1, 2, 3], [1, 2, 3]) - 1.0) < 1e-12

    def test_orthogonal(self):
        assert cosine_similarity([1, 0], [0, 1]) == 0.0

    def test_derived(self):
        assert abs(cosine_similarity([1, 2], [2, 1]) - 0.8) < 1e-12

    def test_zero_norm(self):
        assert cosine_similarity([0, 0], [1, 2]) == 0.0


class TestPearsonAbs:
    def test_linear(self):
        x = np.arange(10.0)
        assert abs(pearson_abs(x, 3 * x + 1) - 1.0) < 1e-12
        assert abs(pearson_abs(x, -2 * x) - 1.0) < 1e-12

    def test_constant_is_zero(self):
        assert pearson_abs(np.ones(5), np.arange(5.0)) == 0.0

    def test_range(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            r = pearson_abs(rng.normal(size=15), rng.normal(size=15))
            assert 0.0 <= r <= 1.0


class TestDescriptiveStats:
    def test_derived_1234(self):
        s = descriptive_stats([1, 2, 3, 4])
        assert s.count == 4
        assert abs(s.std - 1.2909944487358056) < 1e-12
        assert s.min == 1 and s.max == 4
        assert (s.q1, s.q2, s.q3) == (1.75, 2.5, 3.25)

    def test_singleton(self):
        s = descriptive_stats([5])
        assert s.as_array().tolist() == [1, 0, 5, 5, 5, 5, 5]

    def test_constant(self):
        s = descriptive_stats([2, 2, 2, 2])
        assert s.as_array().tolist() == [4, 0, 2, 2, 2, 2, 2]

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_permutation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=12)
        a = descriptive_stats(x).as_array()
        b = descriptive_stats(rng.permutation(x)).as_array()
        assert np.max(np.abs(a - b)) < 1e-12

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            descriptive_stats([])
