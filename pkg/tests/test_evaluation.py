import itertools

import numpy as np
import pytest

from guidedcluster.data import SyntheticSpec, generate_synthetic
from guidedcluster.evaluation import (
    cluster_profiles,
    clustering_accuracy,
    contingency_table,
    hungarian,
    nmi,
    profile_to_csv,
    profile_to_text,
)
from guidedcluster.numerics import make_rng


def brute_force_assignment(cost):
    best, best_perm = np.inf, None
    for perm in itertools.permutations(range(cost.shape[0])):
        total = sum(cost[i, p] for i, p in enumerate(perm))
        if total < best:
            best, best_perm = total, perm
    return best, best_perm


class TestHungarian:
    def test_identity_cheapest(self):
        cost = np.ones((4, 4)) - np.eye(4)
        assert hungarian(cost).tolist() == [0, 1, 2, 3]

    def test_two_by_two_cross(self):
        perm = hungarian(np.array([[4.0, 1.0], [2.0, 3.0]]))
        assert perm.tolist() == [1, 0]  # total cost 3

    @pytest.mark.parametrize("k", [2, 3, 4, 5, 6])
    def test_matches_exhaustive_search(self, k):
        rng = make_rng(100 + k, 0)
        for _ in range(20):
            cost = rng.integers(0, 50, size=(k, k)).astype(float)
            perm = hungarian(cost)
            got = float(cost[np.arange(k), perm].sum())
            best, _ = brute_force_assignment(cost)
            assert got == pytest.approx(best)

    def test_non_square_rejected(self):
        with pytest.raises(ValueError, match="square"):
            hungarian(np.zeros((2, 3)))


class TestClusteringAccuracy:
    def test_perfect(self):
        labels = np.array([0, 1, 2, 0, 1, 2])
        assert clustering_accuracy(labels, labels) == 1.0

    def test_relabeled_perfect(self):
        truth = np.array([0, 0, 1, 1, 2, 2])
        pred = np.array([1, 1, 0, 0, 2, 2])
        assert clustering_accuracy(pred, truth) == 1.0

    def test_hand_enumerated_case(self):
        truth = np.array([1, 1, 0, 0, 2, 2])
        pred = np.array([0, 0, 0, 1, 2, 2])
        assert clustering_accuracy(pred, truth) == pytest.approx(5.0 / 6.0)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            clustering_accuracy(np.array([]), np.array([]))

    def test_unequal_label_cardinalities_padded(self):
        truth = np.array([0, 1, 2, 0, 1, 2])
        pred = np.zeros(6, dtype=int)  # constant predictor
        assert clustering_accuracy(pred, truth) == pytest.approx(2.0 / 6.0)

    def test_permutation_invariance_property(self):
        rng = make_rng(200, 0)
        for _ in range(1000):
            n = int(rng.integers(4, 40))
            k = int(rng.integers(2, 6))
            truth = rng.integers(k, size=n)
            pred = rng.integers(k, size=n)
            base = clustering_accuracy(pred, truth)
            perm_p = rng.permutation(k)
            perm_t = rng.permutation(k)
            assert clustering_accuracy(perm_p[pred], truth) == pytest.approx(base)
            assert clustering_accuracy(pred, perm_t[truth]) == pytest.approx(base)

    def test_constant_predictor_scores_modal_share(self):
        rng = make_rng(201, 0)
        truth = rng.integers(3, size=200)
        pred = np.full(200, 1)
        modal = np.bincount(truth).max() / 200
        assert clustering_accuracy(pred, truth) == pytest.approx(modal)


class TestNmi:
    def test_identical_labelings(self):
        labels = np.array([0, 1, 0, 1, 2, 2])
        assert nmi(labels, labels) == pytest.approx(1.0)

    def test_relabeling_invariance(self):
        truth = np.array([0, 0, 1, 1, 2, 2])
        pred = np.array([2, 2, 0, 0, 1, 1])
        assert nmi(pred, truth) == pytest.approx(1.0)

    def test_independent_labelings_near_zero(self):
        rng = make_rng(202, 0)
        scores = [
            nmi(rng.integers(3, size=5000), rng.integers(3, size=5000)) for _ in range(5)
        ]
        assert float(np.mean(scores)) <= 0.05

    def test_degenerate_single_cluster_both_sides(self):
        assert nmi(np.zeros(10, dtype=int), np.zeros(10, dtype=int)) == 1.0

    def test_one_side_degenerate(self):
        truth = np.array([0, 1] * 10)
        assert nmi(np.zeros(20, dtype=int), truth) == pytest.approx(0.0)


class TestContingency:
    def test_counts_and_padding(self):
        pred = np.array([0, 0, 1, 1])
        truth = np.array([0, 1, 2, 2])
        table = contingency_table(pred, truth)
        assert table.shape == (3, 3)
        assert table.sum() == 4
        assert table[0, 0] == 1 and table[0, 1] == 1 and table[1, 2] == 2

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            contingency_table(np.array([0]), np.array([0, 1]))


class TestClusterProfiles:
    def _dataset(self, n=400, seed=12):
        return generate_synthetic(SyntheticSpec(n=n, seed=seed))

    def test_single_cluster_equals_global_stats(self):
        ds = self._dataset()
        profile = cluster_profiles(ds, np.zeros(ds.n, dtype=int))
        table = np.concatenate([ds.denormalized_x(), ds.denormalized_y()], axis=1)
        assert np.allclose(profile.means[0], table.mean(axis=0), atol=1e-9)
        assert np.allclose(profile.stds[0], table.std(axis=0), atol=1e-9)
        assert profile.counts == [ds.n]

    def test_binary_feature_split(self, tmp_path):
        from guidedcluster.data import load_csv

        rows = ["flag,other,g"]
        for i in range(20):
            rows.append(f"{i % 2},{i},{i * 0.1}")
        p = tmp_path / "t.csv"
        p.write_text("\n".join(rows) + "\n", encoding="utf-8")
        ds = load_csv(p, ["g"])
        assignments = (np.arange(20) % 2).astype(int)
        profile = cluster_profiles(ds, assignments)
        flag_idx = profile.columns.index("flag")
        assert profile.means[0, flag_idx] == pytest.approx(0.0, abs=1e-12)
        assert profile.means[1, flag_idx] == pytest.approx(1.0, abs=1e-12)

    def test_random_assignment_means_near_global(self):
        ds = self._dataset(n=2000, seed=13)
        rng = make_rng(999, 55)  # unrelated stream: assignment independent of labels
        assignments = rng.integers(3, size=ds.n)
        profile = cluster_profiles(ds, assignments)
        table = np.concatenate([ds.denormalized_x(), ds.denormalized_y()], axis=1)
        global_mean = table.mean(axis=0)
        global_sd = table.std(axis=0)
        for c in range(3):
            n_c = profile.counts[c]
            tol = 4.0 * global_sd / np.sqrt(n_c)
            assert np.all(np.abs(profile.means[c] - global_mean) < tol)

    def test_empty_cluster_blank_stats(self):
        ds = self._dataset(n=100, seed=14)
        assignments = np.full(ds.n, 2, dtype=int)  # clusters 0,1 empty
        profile = cluster_profiles(ds, assignments)
        assert profile.counts[0] == 0 and profile.counts[1] == 0
        assert np.all(np.isnan(profile.means[0]))
        text = profile_to_text(profile)
        assert "-" in text
        csv_text = profile_to_csv(profile)
        assert csv_text.splitlines()[1].startswith("0,0,,")

    def test_length_mismatch(self):
        ds = self._dataset(n=100, seed=15)
        with pytest.raises(ValueError):
            cluster_profiles(ds, np.zeros(5, dtype=int))

    def test_renders_include_guides(self):
        ds = self._dataset(n=100, seed=16)
        profile = cluster_profiles(ds, np.zeros(ds.n, dtype=int))
        assert profile.columns[-2:] == ["g0", "g1"]
        assert "g1" in profile_to_csv(profile).splitlines()[0]
