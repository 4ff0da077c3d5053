import numpy as np
import numpy.testing as npt
import pytest

from actcomp.core import (
    SparseAdjacency,
    build_histogram,
    dense_matrix,
    derive_seed,
    make_rng,
    normalize_adjacency,
    spmm,
)


def _dense_normalize_oracle(adj_dense):
    """Independent dense-matrix route: D^{-1/2} (A + I) D^{-1/2}."""
    a = adj_dense.astype(np.float64) + np.eye(adj_dense.shape[0])
    d = a.sum(axis=1)
    inv = np.diag(1.0 / np.sqrt(d))
    return inv @ a @ inv


class TestDenseMatrix:
    def test_accepts_lists(self):
        m = dense_matrix([[1, 2], [3, 4]])
        assert m.dtype == np.float32 and m.shape == (2, 2)
        assert m.flags["C_CONTIGUOUS"]

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            dense_matrix([[np.nan, 0.0]])
        with pytest.raises(ValueError):
            dense_matrix([[np.inf, 0.0]])

    def test_rejects_wrong_ndim(self):
        with pytest.raises(ValueError):
            dense_matrix([1.0, 2.0])


class TestNormalizeAdjacency:
    def test_single_node(self):
        a = SparseAdjacency.from_edges(1, np.empty((0, 2), dtype=np.int64))
        npt.assert_allclose(normalize_adjacency(a).to_dense(), [[1.0]])

    def test_two_nodes_one_edge(self):
        a = SparseAdjacency.from_edges(2, [(0, 1), (1, 0)])
        npt.assert_allclose(normalize_adjacency(a).to_dense(), np.full((2, 2), 0.5), rtol=1e-6)

    def test_path_graph_middle_degree(self):
        a = SparseAdjacency.from_edges(3, [(0, 1), (1, 0), (1, 2), (2, 1)])
        dense = normalize_adjacency(a).to_dense()
        # degrees with self-loops are (2, 3, 2)
        npt.assert_allclose(dense[1, 1], 1.0 / 3.0, rtol=1e-6)
        npt.assert_allclose(dense[0, 0], 0.5, rtol=1e-6)
        npt.assert_allclose(dense[0, 1], 1.0 / np.sqrt(6.0), rtol=1e-6)

    def test_matches_dense_oracle_random_graphs(self):
        rng = make_rng(7)
        for _ in range(5):
            n = 16
            mask = np.triu(rng.random((n, n)) < 0.3, k=1)
            dense_a = (mask | mask.T).astype(np.float32)
            idx = np.argwhere(dense_a > 0)
            a = SparseAdjacency.from_edges(n, idx)
            got = normalize_adjacency(a).to_dense()
            want = _dense_normalize_oracle(dense_a)
            npt.assert_allclose(got, want, rtol=1e-5)

    def test_output_symmetric(self):
        rng = make_rng(11)
        mask = np.triu(rng.random((12, 12)) < 0.4, k=1)
        a = SparseAdjacency.from_edges(12, np.argwhere(mask | mask.T))
        dense = normalize_adjacency(a).to_dense()
        npt.assert_array_equal(dense, dense.T)

    def test_self_loops_added_once(self):
        plain = SparseAdjacency.from_edges(2, [(0, 1), (1, 0)])
        with_loop = SparseAdjacency.from_edges(2, [(0, 1), (1, 0), (0, 0)])
        npt.assert_array_equal(
            normalize_adjacency(plain).to_dense(),
            normalize_adjacency(with_loop).to_dense(),
        )

    def test_rejects_negative_weights(self):
        a = SparseAdjacency(n=2, rows=np.array([0]), cols=np.array([1]),
                            values=np.array([-1.0], dtype=np.float32))
        with pytest.raises(ValueError):
            normalize_adjacency(a)

    def test_rejects_out_of_range_edge(self):
        with pytest.raises(ValueError):
            SparseAdjacency.from_edges(2, [(0, 2)])


class TestSpmm:
    def test_identity(self):
        eye = SparseAdjacency.from_edges(3, [(i, i) for i in range(3)])
        h = make_rng(0).normal(size=(3, 4)).astype(np.float32)
        npt.assert_array_equal(spmm(eye, h), h)

    def test_zero_h(self):
        a = SparseAdjacency.from_edges(3, [(0, 1), (1, 0)])
        npt.assert_array_equal(spmm(a, np.zeros((3, 2), np.float32)), np.zeros((3, 2)))

    def test_path_row_sums(self):
        a = SparseAdjacency.from_edges(3, [(0, 1), (1, 0), (1, 2), (2, 1)])
        ah = normalize_adjacency(a)
        got = spmm(ah, np.ones((3, 1), np.float32)).ravel()
        want = ah.to_dense().astype(np.float64) @ np.ones(3)
        npt.assert_allclose(got, want, rtol=1e-6)

    def test_matches_dense_oracle(self):
        rng = make_rng(3)
        mask = np.triu(rng.random((16, 16)) < 0.25, k=1)
        a = SparseAdjacency.from_edges(16, np.argwhere(mask | mask.T))
        ah = normalize_adjacency(a)
        h = rng.normal(size=(16, 5)).astype(np.float32)
        npt.assert_allclose(spmm(ah, h), ah.to_dense() @ h, rtol=1e-5, atol=1e-6)

    def test_dimension_mismatch(self):
        a = SparseAdjacency.from_edges(3, [(0, 1)])
        with pytest.raises(ValueError):
            spmm(a, np.zeros((4, 2), np.float32))


class TestHistogram:
    def test_single_value(self):
        h = build_histogram([0.5], [0, 1, 2])
        npt.assert_array_equal(h.counts, [1, 0])
        assert h.total == 1

    def test_last_edge_right_closed(self):
        h = build_histogram([2.0], [0, 1, 2])
        npt.assert_array_equal(h.counts, [0, 1])

    def test_half_open_interior(self):
        h = build_histogram([1.0], [0, 1, 2])
        npt.assert_array_equal(h.counts, [0, 1])

    def test_overflow_underflow_tracked(self):
        h = build_histogram([-0.5, 0.5, 2.5], [0, 1, 2])
        npt.assert_array_equal(h.counts, [1, 0])
        assert h.underflow == 1 and h.overflow == 1

    def test_empty_input(self):
        h = build_histogram([], [0, 1])
        npt.assert_array_equal(h.counts, [0])
        assert h.total == 0

    def test_uniform_counts_within_binomial_tolerance(self):
        n = 10000
        vals = make_rng(5).random(n) * 3.0
        h = build_histogram(vals, [0, 1, 2, 3])
        p = 1.0 / 3.0
        sigma = np.sqrt(n * p * (1 - p))
        assert np.all(np.abs(h.counts - n * p) < 5 * sigma)

    def test_rejects_bad_edges(self):
        with pytest.raises(ValueError):
            build_histogram([1.0], [0, 0, 1])


class TestRng:
    def test_same_seed_bitwise_identical(self):
        a = make_rng(123).random(1000)
        b = make_rng(123).random(1000)
        npt.assert_array_equal(a, b)
        ia = make_rng(9).integers(0, 1 << 62, 1000)
        ib = make_rng(9).integers(0, 1 << 62, 1000)
        npt.assert_array_equal(ia, ib)

    def test_derive_seed_stable_and_distinct(self):
        s1 = derive_seed(42, 1)
        assert s1 == derive_seed(42, 1)
        assert s1 != derive_seed(42, 2)
        assert s1 != derive_seed(43, 1)

    def test_substreams_independent_of_master_draws(self):
        child = derive_seed(42, 7)
        before = make_rng(child).random(8)
        master = make_rng(42)
        master.random(100)
        npt.assert_array_equal(make_rng(child).random(8), before)
