import json
import math

import numpy as np
import pytest

from loopeval.diversity import (
    ClusterModel,
    assign_bins,
    evaluate_diversity,
    jsd,
    kmeans_fit,
    ndb,
    normal_ppf,
)


class TestNormalPpf:
    def test_critical_value_at_005(self):
        assert normal_ppf(0.975) == pytest.approx(1.959964, abs=5e-7)

    def test_symmetry_and_median(self):
        assert normal_ppf(0.5) == pytest.approx(0.0, abs=1e-12)
        for q in (0.6, 0.9, 0.99, 0.999):
            assert normal_ppf(q) == pytest.approx(-normal_ppf(1.0 - q), abs=1e-10)

    def test_matches_scipy(self):
        from scipy.stats import norm

        for q in (0.001, 0.025, 0.3, 0.7, 0.975, 0.9999):
            assert normal_ppf(q) == pytest.approx(float(norm.ppf(q)), abs=1e-9)

    def test_domain(self):
        with pytest.raises(ValueError):
            normal_ppf(0.0)
        with pytest.raises(ValueError):
            normal_ppf(1.0)


class TestKmeansFit:
    def test_adjacent_corner_pairs_cluster_together(self):
        # two tight pairs of corners, pair spacing 3 vs corner spacing ~140
        # (diagonal separation so per-dimension standardization keeps the
        # pairs tight)
        pts = np.array([[0.0, 0.0], [0.0, 3.0], [100.0, 97.0], [100.0, 100.0]])
        for seed in range(5):
            model = kmeans_fit(pts, k=2, seed=seed)
            counts = sorted(model.reference_counts.tolist())
            assert counts == [2, 2]
            # exhaustive check: cluster members are the adjacent corners
            labels = [int(assign_bins(model, p[None, :]).argmax()) for p in pts]
            groups = {}
            for idx, lab in enumerate(labels):
                groups.setdefault(lab, []).append(idx)
            assert sorted(sorted(g) for g in groups.values()) == [[0, 1], [2, 3]]

    def test_identical_points_rejected(self):
        pts = np.tile([1.0, 2.0], (10, 1))
        with pytest.raises(ValueError):
            kmeans_fit(pts, k=2, seed=0)

    def test_k_equals_n(self):
        rng = np.random.default_rng(0)
        pts = rng.normal(size=(8, 3))
        model = kmeans_fit(pts, k=8, seed=1)
        assert model.reference_counts.tolist() == [1] * 8
        xs = (pts - model.standardizer_mean) / model.standardizer_std
        order = assign_bins(model, pts)
        assert order.sum() == 8
        inertia = 0.0
        for i, row in enumerate(xs):
            d = np.sum((model.centroids - row) ** 2, axis=1)
            inertia += float(d.min())
        assert inertia == pytest.approx(0.0, abs=1e-20)

    def test_determinism(self):
        rng = np.random.default_rng(2)
        pts = rng.normal(size=(200, 6))
        m1 = kmeans_fit(pts, k=10, seed=33)
        m2 = kmeans_fit(pts, k=10, seed=33)
        np.testing.assert_array_equal(m1.centroids, m2.centroids)
        np.testing.assert_array_equal(m1.reference_counts, m2.reference_counts)

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            kmeans_fit(np.zeros((3, 2)), k=4)
        with pytest.raises(ValueError):
            kmeans_fit(np.zeros((3, 2)), k=1)
        bad = np.zeros((5, 2))
        bad[0, 0] = np.nan
        with pytest.raises(ValueError):
            kmeans_fit(bad, k=2)


def handcrafted_model(centroids, counts):
    centroids = np.asarray(centroids, dtype=np.float64)
    return ClusterModel(
        centroids=centroids,
        reference_counts=np.asarray(counts, dtype=np.int64),
        standardizer_mean=np.zeros(centroids.shape[1]),
        standardizer_std=np.ones(centroids.shape[1]),
        seed=0,
        k=centroids.shape[0],
    )


class TestAssignBins:
    def test_self_assignment_reproduces_counts(self):
        rng = np.random.default_rng(4)
        pts = rng.normal(size=(150, 5))
        model = kmeans_fit(pts, k=12, seed=9)
        counts = assign_bins(model, pts)
        np.testing.assert_array_equal(counts, model.reference_counts)

    def test_exact_centroid_lands_in_its_bin(self):
        model = handcrafted_model(np.eye(5) * 10.0, [1, 1, 1, 1, 1])
        counts = assign_bins(model, model.centroids[3][None, :])
        assert counts.tolist() == [0, 0, 0, 1, 0]

    def test_tie_breaks_to_lowest_index(self):
        # the probe (0, 0) is exactly equidistant from centroids 1 and 4;
        # all other centroids are far away
        centroids = np.array(
            [[0.0, 50.0], [-2.0, 0.0], [50.0, 50.0], [-50.0, 50.0], [2.0, 0.0]]
        )
        model = handcrafted_model(centroids, [1] * 5)
        counts = assign_bins(model, np.array([[0.0, 0.0]]))
        assert counts.tolist() == [0, 1, 0, 0, 0]

    def test_dimension_mismatch(self):
        model = handcrafted_model(np.eye(3), [1, 1, 1])
        with pytest.raises(ValueError):
            assign_bins(model, np.zeros((2, 4)))


def ndb_scalar_oracle(ref_counts, gen_counts, alpha):
    """Brute-force per-bin z computation with plain Python floats."""
    n_r = sum(ref_counts)
    n_g = sum(gen_counts)
    crit = normal_ppf(1.0 - alpha / 2.0)
    flagged = []
    for nk, nhat in zip(ref_counts, gen_counts):
        p_r = nk / n_r
        p_g = nhat / n_g
        pooled = (nk + nhat) / (n_r + n_g)
        se = math.sqrt(pooled * (1.0 - pooled) * (1.0 / n_r + 1.0 / n_g))
        if se > 0 and abs((p_r - p_g) / se) > crit:
            flagged.append(True)
        else:
            flagged.append(False)
    return flagged


class TestNdb:
    def test_proportional_counts_no_difference(self):
        model = handcrafted_model(np.eye(4) * 5, [10, 20, 30, 40])
        result = ndb(model, np.array([20, 40, 60, 80]), alpha=0.05)
        assert result.ndb == 0
        assert result.ndb_over_k == 0.0
        assert all(not d for (_, _, _, d) in result.per_bin)

    def test_mode_collapse_oracle(self):
        k = 100
        ref = [100] * k
        gen = [0] * k
        gen[0] = 10000
        centroids = np.concatenate([np.eye(k)], axis=0) * 50
        model = handcrafted_model(centroids, ref)
        result = ndb(model, np.array(gen), alpha=0.05)
        expected = ndb_scalar_oracle(ref, gen, 0.05)
        got = [d for (_, _, _, d) in result.per_bin]
        assert got == expected
        assert result.ndb == sum(expected)
        # every reference-occupied bin differs, including the collapsed one
        assert result.ndb == k

    def test_fuzz_against_oracle(self):
        rng = np.random.default_rng(21)
        for _ in range(25):
            k = int(rng.integers(2, 30))
            ref = rng.integers(0, 50, size=k)
            ref[0] = max(ref[0], 1)
            gen = rng.integers(0, 50, size=k)
            gen[1 % k] = max(gen[1 % k], 1)
            model = handcrafted_model(rng.normal(size=(k, 3)) * 20, ref)
            alpha = float(rng.uniform(0.01, 0.2))
            result = ndb(model, gen, alpha=alpha)
            expected = ndb_scalar_oracle(ref.tolist(), gen.tolist(), alpha)
            assert [d for (_, _, _, d) in result.per_bin] == expected

    def test_label_permutation_invariance(self):
        rng = np.random.default_rng(22)
        k = 12
        ref = rng.integers(1, 40, size=k)
        gen = rng.integers(0, 40, size=k)
        gen[0] = max(gen[0], 1)
        model = handcrafted_model(rng.normal(size=(k, 2)) * 30, ref)
        base = ndb(model, gen).ndb
        perm = rng.permutation(k)
        model_p = handcrafted_model(model.centroids[perm], ref[perm])
        assert ndb(model_p, gen[perm]).ndb == base

    def test_alpha_domain(self):
        model = handcrafted_model(np.eye(2) * 9, [5, 5])
        with pytest.raises(ValueError):
            ndb(model, np.array([5, 5]), alpha=0.0)
        with pytest.raises(ValueError):
            ndb(model, np.array([0, 0]), alpha=0.05)


class TestJsd:
    def test_equal_distributions(self):
        assert jsd(np.array([3, 5, 2]), np.array([6, 10, 4])) == 0.0
        assert jsd(np.array([1, 1]), np.array([1, 1])) == 0.0

    def test_disjoint_support_is_one(self):
        assert jsd(np.array([1, 0]), np.array([0, 1])) == pytest.approx(1.0, abs=1e-12)

    def test_hand_computed(self):
        value = jsd(np.array([1, 1]), np.array([2, 0]))
        assert value == pytest.approx(0.3113, abs=1e-4)

    def test_symmetry_and_bounds(self):
        rng = np.random.default_rng(23)
        for _ in range(30):
            k = int(rng.integers(2, 20))
            p = rng.integers(0, 30, size=k)
            q = rng.integers(0, 30, size=k)
            p[0] = max(p[0], 1)
            q[-1] = max(q[-1], 1)
            a = jsd(p, q)
            b = jsd(q, p)
            assert a == pytest.approx(b, abs=1e-12)
            assert 0.0 <= a <= 1.0

    def test_zero_total_rejected(self):
        with pytest.raises(ValueError):
            jsd(np.array([0, 0]), np.array([1, 1]))


class TestEvaluateDiversity:
    def test_same_set_is_all_zero(self):
        rng = np.random.default_rng(24)
        mels = rng.normal(size=(40, 8, 10))
        result = evaluate_diversity(mels, mels.copy(), k=5, alpha=0.05, seed=3)
        assert result.ndb == 0
        assert result.jsd == 0.0

    def test_full_determinism(self):
        rng = np.random.default_rng(25)
        ref = rng.normal(size=(60, 4, 6))
        gen = rng.normal(size=(30, 4, 6))
        results = []
        for _ in range(2):
            r = evaluate_diversity(ref, gen, k=6, alpha=0.05, seed=11)
            results.append(
                json.dumps(
                    {"ndb": r.ndb, "jsd": r.jsd, "per_bin": r.per_bin, "params": r.params},
                    sort_keys=True,
                )
            )
        assert results[0] == results[1]

    def test_provenance_recorded(self):
        rng = np.random.default_rng(26)
        ref = rng.normal(size=(50, 4, 6))
        r = evaluate_diversity(ref, ref, k=4, alpha=0.1, seed=2)
        assert r.params["k"] == 4
        assert r.params["alpha"] == 0.1
        assert r.params["seed"] == 2
        assert r.params["n_reference"] == 50
        assert r.params["vector_dim"] == 24
