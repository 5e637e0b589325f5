import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from centroidcl.clustering import AggVarConfig, MemoryStore
from centroidcl.curiosity import (
    NoveltyConfig,
    detect_unknown,
    score,
    score_pool,
    select_informative,
)
from centroidcl.errors import ConfigError, DataError
from centroidcl.rng import Xoshiro256StarStar
from centroidcl.synthetic import make_blob_dataset


def store_from_points(points_by_class, dim):
    store = MemoryStore(dim, AggVarConfig(0.0))  # one cluster per point
    for cid, rows in points_by_class.items():
        for row in rows:
            store.process_sample(row, cid)
    return store


class TestScore:
    def test_zero_at_stored_centroid(self):
        store = store_from_points({0: [[1.0, 2.0]], 3: [[5.0, 5.0]]}, 2)
        assert score(store, [5.0, 5.0]) == 0.0
        assert score(store, [1.0, 2.0]) == 0.0

    def test_empty_store_is_infinitely_curious(self):
        store = MemoryStore(2, AggVarConfig(1.0))
        assert score(store, [0.0, 0.0]) == math.inf

    def test_dimension_checked_even_on_empty_store(self):
        store = MemoryStore(2, AggVarConfig(1.0))
        with pytest.raises(DataError):
            score(store, [1.0, 2.0, 3.0])

    def test_matches_exhaustive_scan(self):
        rng = Xoshiro256StarStar(3)
        points = {c: [rng.normals(4) * 5.0 for _ in range(3)] for c in range(4)}
        store = store_from_points(points, 4)
        flat = [np.asarray(p) for rows in points.values() for p in rows]
        for _ in range(200):
            x = rng.normals(4) * 6.0
            expected = min(np.linalg.norm(x - p) for p in flat)
            assert math.isclose(score(store, x), expected)

    def test_adding_a_centroid_never_increases_scores(self):
        rng = Xoshiro256StarStar(5)
        store = store_from_points({0: [[0.0, 0.0], [4.0, 4.0]]}, 2)
        probes = [rng.normals(2) * 8.0 for _ in range(100)]
        before = [score(store, x) for x in probes]
        store.process_sample([2.0, -3.0], 1)
        after = [score(store, x) for x in probes]
        assert all(b >= a for b, a in zip(before, after))

    def test_monotone_along_ray_from_nearest_centroid(self):
        store = store_from_points({0: [[0.0, 0.0]], 1: [[100.0, 100.0]]}, 2)
        direction = np.array([1.0, -1.0]) / math.sqrt(2)
        previous = -1.0
        for radius in np.linspace(0.0, 30.0, 40):
            value = score(store, radius * direction)
            assert value >= previous
            previous = value


class TestSelectInformative:
    def test_zero_budget(self):
        store = store_from_points({0: [[0.0, 0.0]]}, 2)
        result = select_informative(store, np.ones((5, 2)), 0)
        assert len(result.chosen_indices) == 0

    def test_negative_budget_rejected(self):
        store = store_from_points({0: [[0.0, 0.0]]}, 2)
        with pytest.raises(ConfigError):
            select_informative(store, np.ones((5, 2)), -1)

    def test_distant_point_wins(self):
        store = store_from_points({0: [[0.0, 0.0]]}, 2)
        pool = np.array([[0.0, 0.0], [100.0, 0.0]])
        result = select_informative(store, pool, 1)
        assert result.chosen_indices.tolist() == [1]
        assert result.scores[0] == 100.0

    def test_matches_full_sort_oracle_on_large_pool(self):
        rng = Xoshiro256StarStar(7)
        points = {c: [rng.normals(3) * 4.0 for _ in range(2)] for c in range(3)}
        store = store_from_points(points, 3)
        pool = rng.normals(1000 * 3).reshape(1000, 3) * 10.0
        result = select_informative(store, pool, 50)
        scores = score_pool(store, pool)
        expected = sorted(range(1000), key=lambda i: (-scores[i], i))[:50]
        assert result.chosen_indices.tolist() == expected
        assert np.all(np.diff(result.scores) <= 0.0)

    def test_ties_prefer_lower_pool_index(self):
        store = store_from_points({0: [[0.0, 0.0]]}, 2)
        pool = np.array([[3.0, 0.0], [0.0, 3.0], [-3.0, 0.0]])  # all distance 3
        result = select_informative(store, pool, 2)
        assert result.chosen_indices.tolist() == [0, 1]

    def test_budget_larger_than_pool(self):
        store = store_from_points({0: [[0.0, 0.0]]}, 2)
        result = select_informative(store, np.ones((4, 2)), 99)
        assert sorted(result.chosen_indices.tolist()) == [0, 1, 2, 3]

    @given(st.integers(min_value=0, max_value=40), st.integers(min_value=0, max_value=2**31))
    @settings(max_examples=30, deadline=None)
    def test_property_first_k_of_stable_sort(self, budget, seed):
        rng = Xoshiro256StarStar(seed)
        store = store_from_points({0: [[0.0, 0.0], [6.0, 6.0]]}, 2)
        pool = rng.normals(30 * 2).reshape(30, 2) * 5.0
        scores = score_pool(store, pool)
        expected = sorted(range(30), key=lambda i: (-scores[i], i))[: min(budget, 30)]
        got = select_informative(store, pool, budget).chosen_indices.tolist()
        assert got == expected


class TestDetectUnknown:
    def test_known_at_exact_centroid(self):
        store = store_from_points({3: [[1.0, 1.0]]}, 2)
        result = detect_unknown(store, [1.0, 1.0], NoveltyConfig(0.5))
        assert result.is_known and result.class_id == 3
        assert result.distance == 0.0

    def test_empty_store_always_unknown(self):
        store = MemoryStore(2, AggVarConfig(1.0))
        result = detect_unknown(store, [0.0, 0.0], NoveltyConfig(1e9))
        assert not result.is_known and result.class_id is None

    def test_infinite_threshold_never_unknown_on_nonempty_store(self):
        store = store_from_points({0: [[0.0, 0.0]]}, 2)
        rng = Xoshiro256StarStar(9)
        for _ in range(50):
            x = rng.normals(2) * 1e6
            assert detect_unknown(store, x, NoveltyConfig(math.inf)).is_known

    def test_zero_threshold_unknown_off_centroid(self):
        store = store_from_points({0: [[2.0, 2.0]]}, 2)
        config = NoveltyConfig(0.0)
        assert detect_unknown(store, [2.0, 2.0], config).is_known
        assert not detect_unknown(store, [2.0, 2.0001], config).is_known

    def test_synthetic_blob_geometry(self):
        # class centers >= 10*sigma apart: held-out known samples nearly always
        # within 5 of a learned centroid, far outliers never
        ds = make_blob_dataset(
            n_classes=5, clusters_per_class=1, dim=8, samples_per_cluster=80,
            center_min_distance=10.0, sigma=1.0, seed=21,
        )
        feats = ds.features.astype(np.float64)
        store = MemoryStore(8, AggVarConfig(5.0))
        config = NoveltyConfig(5.0)
        train_mask = np.arange(len(ds)) % 2 == 0
        for x, label in zip(feats[train_mask], ds.labels[train_mask]):
            store.process_sample(x, int(label))
        held_out = feats[~train_mask]
        held_labels = ds.labels[~train_mask]
        verdicts = [detect_unknown(store, x, config) for x in held_out]
        known_rate = np.mean([v.is_known for v in verdicts])
        assert known_rate >= 0.99
        correct = [v.class_id == label for v, label in zip(verdicts, held_labels) if v.is_known]
        assert np.mean(correct) == 1.0
        rng = Xoshiro256StarStar(22)
        rejected = 0
        trials = 200
        for _ in range(trials):
            direction = rng.normals(8)
            outlier = direction / np.linalg.norm(direction) * 1000.0
            if not detect_unknown(store, outlier, config).is_known:
                rejected += 1
        assert rejected == trials

    def test_threshold_validation(self):
        with pytest.raises(ConfigError):
            NoveltyConfig(-0.1)
        with pytest.raises(ConfigError):
            NoveltyConfig(float("nan"))
