import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from rerankit.enhance import (
    DmonConfig,
    adaptive_sigma,
    build_first_order,
    default_decay,
    enhance,
    expand_order,
    gaussian_weights,
    latent_features,
)
from rerankit.matrix_ops import l2_normalize_rows, pairwise_sq_euclidean
from rerankit.synthetic import SynthSpec, generate

from naive_impl import naive_enhance, naive_neighbor_orders


def line_distances():
    """Three points on a line at 0, 1, 2 (unsquared distances)."""
    pts = np.array([[0.0], [1.0], [2.0]])
    return np.sqrt(pairwise_sq_euclidean(pts, pts))


class TestBuildFirstOrder:
    def test_line_with_tie(self):
        orders = build_first_order(line_distances(), k1=1)
        level = orders.order(1)
        assert_array_equal(level[0], [1])
        assert_array_equal(level[1], [0])  # tie between 0 and 2 -> lower index
        assert_array_equal(level[2], [1])

    def test_k1_clamped_with_warning(self):
        with pytest.warns(RuntimeWarning, match="clamping"):
            orders = build_first_order(line_distances(), k1=5)
        assert all(len(nbrs) == 2 for nbrs in orders.order(1))

    def test_no_self_membership(self):
        rng = np.random.default_rng(53)
        pts = rng.standard_normal((12, 3))
        dist = np.sqrt(pairwise_sq_euclidean(pts, pts))
        orders = build_first_order(dist, k1=4)
        for x, nbrs in enumerate(orders.order(1)):
            assert x not in nbrs

    def test_matches_bruteforce(self):
        rng = np.random.default_rng(59)
        pts = rng.standard_normal((30, 4))
        dist = np.sqrt(pairwise_sq_euclidean(pts, pts))
        orders = build_first_order(dist, k1=3)
        expected = naive_neighbor_orders(dist, k1=3, num_orders=1)
        for x in range(30):
            assert_array_equal(orders.order(1)[x], expected[0][x])

    def test_squared_and_unsquared_agree(self):
        rng = np.random.default_rng(61)
        pts = rng.standard_normal((15, 3))
        sq = pairwise_sq_euclidean(pts, pts)
        a = build_first_order(sq, k1=3)
        b = build_first_order(np.sqrt(sq), k1=3)
        for x in range(15):
            assert_array_equal(a.order(1)[x], b.order(1)[x])


class TestExpandOrder:
    def test_line_chain(self):
        orders = expand_order(build_first_order(line_distances(), k1=1))
        assert_array_equal(orders.order(2)[2], [0])  # neighbors-of-neighbor minus self

    def test_empty_source_stays_empty(self):
        from rerankit.enhance import NeighborOrders

        empty = np.empty(0, dtype=np.int64)
        one = NeighborOrders(levels=[[empty, np.array([0])]])
        out = expand_order(one)
        assert out.order(2)[0].size == 0

    def test_matches_set_algebra(self):
        rng = np.random.default_rng(67)
        pts = rng.standard_normal((30, 4))
        dist = np.sqrt(pairwise_sq_euclidean(pts, pts))
        orders = build_first_order(dist, k1=2)
        for _ in range(2):
            orders = expand_order(orders)
        expected = naive_neighbor_orders(dist, k1=2, num_orders=3)
        for h in (2, 3):
            for x in range(30):
                assert_array_equal(orders.order(h)[x], expected[h - 1][x])

    def test_disjoint_orders_exclude_lower_levels(self):
        rng = np.random.default_rng(71)
        pts = rng.standard_normal((25, 3))
        dist = np.sqrt(pairwise_sq_euclidean(pts, pts))
        orders = build_first_order(dist, k1=3)
        orders = expand_order(orders, disjoint_orders=True)
        orders = expand_order(orders, disjoint_orders=True)
        expected = naive_neighbor_orders(dist, k1=3, num_orders=3, disjoint=True)
        for h in (2, 3):
            for x in range(25):
                assert_array_equal(orders.order(h)[x], expected[h - 1][x])
        # higher levels share no member with lower ones
        for x in range(25):
            l1 = set(orders.order(1)[x])
            l2 = set(orders.order(2)[x])
            l3 = set(orders.order(3)[x])
            assert not l1 & l2 and not (l1 | l2) & l3


class TestAdaptiveSigma:
    def test_constant_distances(self):
        dist = np.full((4, 4), 0.5)
        np.fill_diagonal(dist, 0.0)
        orders = build_first_order(dist, k1=2)
        assert adaptive_sigma(dist, orders) == 0.5

    def test_empty_sets_fall_back_to_one(self):
        from rerankit.enhance import NeighborOrders

        empty = np.empty(0, dtype=np.int64)
        orders = NeighborOrders(levels=[[empty, empty]])
        assert adaptive_sigma(np.zeros((2, 2)), orders) == 1.0

    def test_matches_flat_average(self):
        rng = np.random.default_rng(73)
        pts = rng.standard_normal((20, 3))
        dist = np.sqrt(pairwise_sq_euclidean(pts, pts))
        orders = build_first_order(dist, k1=3)
        flat = [dist[x, y] for x in range(20) for y in orders.order(1)[x]]
        assert abs(adaptive_sigma(dist, orders) - np.mean(flat)) <= 1e-12


class TestGaussianWeights:
    def test_zero_distance_weight_is_one(self):
        dist = np.zeros((2, 2))
        orders = build_first_order(np.array([[0.0, 1.0], [1.0, 0.0]]), k1=1)
        weights = gaussian_weights(dist, orders, sigma=1.0, normalize_rows=False)
        assert weights[0][0, 1] == 1.0

    def test_bandwidth_scaling_second_order(self):
        # sigma=1, order 2 -> bandwidth 2.25; distance 1 -> exp(-1/10.125)
        from rerankit.enhance import NeighborOrders

        dist = np.array([[0.0, 1.0], [1.0, 0.0]])
        orders = NeighborOrders(
            levels=[
                [np.array([1]), np.array([0])],
                [np.array([1]), np.array([0])],
            ]
        )
        weights = gaussian_weights(dist, orders, sigma=1.0, normalize_rows=False)
        expected = math.exp(-1.0 / (2.0 * 2.25**2))
        assert abs(weights[1][0, 1] - expected) <= 1e-12
        assert abs(expected - 0.90595) <= 1e-5

    def test_non_neighbors_have_zero_weight(self):
        rng = np.random.default_rng(79)
        pts = rng.standard_normal((10, 2))
        dist = np.sqrt(pairwise_sq_euclidean(pts, pts))
        orders = build_first_order(dist, k1=2)
        mat = gaussian_weights(dist, orders, sigma=1.0)[0].toarray()
        members = {(x, y) for x in range(10) for y in orders.order(1)[x]}
        for x in range(10):
            for y in range(10):
                if (x, y) not in members:
                    assert mat[x, y] == 0.0
                else:
                    assert mat[x, y] > 0.0

    def test_rows_sum_to_one_when_normalized(self):
        rng = np.random.default_rng(83)
        pts = rng.standard_normal((12, 3))
        dist = np.sqrt(pairwise_sq_euclidean(pts, pts))
        orders = expand_order(build_first_order(dist, k1=2))
        for mat in gaussian_weights(dist, orders, sigma=0.7, normalize_rows=True):
            sums = np.asarray(mat.sum(axis=1)).ravel()
            nonempty = np.diff(mat.indptr) > 0
            assert_allclose(sums[nonempty], 1.0, atol=1e-12)

    def test_no_diagonal_support(self):
        rng = np.random.default_rng(89)
        pts = rng.standard_normal((14, 3))
        dist = np.sqrt(pairwise_sq_euclidean(pts, pts))
        orders = build_first_order(dist, k1=3)
        for _ in range(2):
            orders = expand_order(orders)
        for mat in gaussian_weights(dist, orders, sigma=1.0):
            coo = mat.tocoo()
            assert not np.any(coo.row == coo.col)

    def test_weights_in_unit_interval(self):
        rng = np.random.default_rng(97)
        pts = rng.standard_normal((15, 4))
        dist = np.sqrt(pairwise_sq_euclidean(pts, pts))
        orders = expand_order(build_first_order(dist, k1=3))
        for normalize in (False, True):
            for mat in gaussian_weights(dist, orders, sigma=1.0, normalize_rows=normalize):
                vals = mat.tocoo().data
                assert np.all(vals > 0.0) and np.all(vals <= 1.0)

    def test_sigma_must_be_positive(self):
        orders = build_first_order(line_distances(), k1=1)
        with pytest.raises(ValueError, match="sigma"):
            gaussian_weights(line_distances(), orders, sigma=0.0)


class TestLatentFeatures:
    def test_zero_weights_give_zero(self):
        import scipy.sparse as sp

        weights = [sp.csr_matrix((3, 3))]
        feats = np.ones((3, 2))
        assert_array_equal(latent_features(weights, feats, [1.0]), np.zeros((3, 2)))

    def test_single_unit_weight_scales_neighbor(self):
        import scipy.sparse as sp

        w = sp.csr_matrix((np.array([1.0]), (np.array([0]), np.array([1]))), shape=(2, 2))
        feats = np.array([[5.0, 0.0], [1.0, 2.0]])
        out = latent_features([w], feats, [0.5])
        assert_allclose(out[0], 0.5 * feats[1])
        assert_allclose(out[1], [0.0, 0.0])

    def test_matches_dense_product(self):
        rng = np.random.default_rng(101)
        pts = rng.standard_normal((18, 5))
        dist = np.sqrt(pairwise_sq_euclidean(pts, pts))
        orders = expand_order(build_first_order(dist, k1=3))
        weights = gaussian_weights(dist, orders, sigma=1.0)
        alphas = default_decay(2)
        expected = sum(
            a * (w.toarray() @ pts) for w, a in zip(weights, alphas)
        )
        assert_allclose(latent_features(weights, pts, alphas), expected, atol=1e-6)


class TestEnhance:
    def test_gamma_one_is_row_normalize_bitwise(self):
        rng = np.random.default_rng(103)
        feats = rng.standard_normal((25, 6))
        out = enhance(feats, DmonConfig(gamma=1.0))
        assert_array_equal(out, l2_normalize_rows(feats))

    def test_matches_composed_oracle(self):
        rng = np.random.default_rng(107)
        feats = rng.standard_normal((40, 8))
        cfg = DmonConfig(k1=2, orders=3, gamma=0.75)
        expected = naive_enhance(feats, k1=2, num_orders=3, gamma=0.75)
        assert_allclose(enhance(feats, cfg), expected, atol=1e-6)

    def test_output_rows_unit_norm(self):
        rng = np.random.default_rng(109)
        feats = rng.standard_normal((30, 5))
        out = enhance(feats, DmonConfig())
        assert_allclose(np.linalg.norm(out, axis=1), 1.0, atol=1e-9)

    def test_single_batch_equals_unbatched_bitwise(self):
        rng = np.random.default_rng(113)
        feats = rng.standard_normal((20, 4))
        whole = enhance(feats, DmonConfig())
        batched = enhance(feats, DmonConfig(batch_size=20))
        assert_array_equal(whole, batched)

    def test_batched_chunks_enhanced_independently(self):
        rng = np.random.default_rng(127)
        feats = rng.standard_normal((23, 4))
        cfg = DmonConfig(k1=2, orders=2, batch_size=8)
        expected = naive_enhance(feats, k1=2, num_orders=2, batch_size=8)
        assert_allclose(enhance(feats, cfg), expected, atol=1e-6)

    def test_fixed_sigma_mode(self):
        rng = np.random.default_rng(131)
        feats = rng.standard_normal((16, 4))
        cfg = DmonConfig(sigma_mode="fixed", sigma=0.4, orders=2)
        expected = naive_enhance(feats, num_orders=2, sigma_mode="fixed", sigma=0.4)
        assert_allclose(enhance(feats, cfg), expected, atol=1e-6)

    def test_duplicate_rows_do_not_crash(self):
        feats = np.ones((6, 3))
        out = enhance(feats, DmonConfig(k1=2, orders=2))
        assert np.all(np.isfinite(out))

    def test_intra_class_compaction_on_clustered_data(self):
        _, _, gallery, g_labels = generate(SynthSpec(seed=7))
        enhanced = enhance(gallery, DmonConfig())

        def mean_intra(feats):
            total, count = 0.0, 0
            for pid in np.unique(g_labels.pids):
                rows = feats[g_labels.pids == pid]
                d = np.sqrt(pairwise_sq_euclidean(rows, rows))
                total += d[np.triu_indices(len(rows), 1)].sum()
                count += len(rows) * (len(rows) - 1) // 2
            return total / count

        assert mean_intra(enhanced) <= mean_intra(gallery)


class TestDmonConfig:
    def test_default_decay_sequence(self):
        assert default_decay(4) == (1.0, 0.5, 0.25, 0.125)
        cfg = DmonConfig(orders=3)
        assert cfg.resolved_alphas() == (1.0, 0.5, 0.25)

    def test_decay_strictly_decreasing(self):
        alphas = DmonConfig(orders=5).resolved_alphas()
        assert all(b < a for a, b in zip(alphas, alphas[1:]))

    def test_validation(self):
        with pytest.raises(ValueError, match="k1"):
            DmonConfig(k1=0)
        with pytest.raises(ValueError, match="gamma"):
            DmonConfig(gamma=1.5)
        with pytest.raises(ValueError, match="alphas"):
            DmonConfig(orders=3, alphas=(1.0, 0.5))
        with pytest.raises(ValueError, match="sigma_mode"):
            DmonConfig(sigma_mode="other")
        with pytest.raises(ValueError, match="sigma"):
            DmonConfig(sigma_mode="fixed", sigma=0.0)
        with pytest.raises(ValueError, match="batch_size"):
            DmonConfig(batch_size=0)
