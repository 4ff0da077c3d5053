import numpy as np
import numpy.testing as npt
import pytest

from actcomp.blockwise import (
    BlockView,
    dequantize_blockwise,
    memory_report,
    quantize_blockwise,
    reshape_blocks,
    serialized_size,
    unreshape_blocks,
)
from actcomp.core import make_rng
from actcomp.quant import QuantScheme, deserialize, quantize_rows, serialize


class TestReshape:
    def test_even_split(self):
        view, flat = reshape_blocks(np.zeros((4, 4), np.float32), 8)
        assert view.num_blocks == 2 and view.tail_len == 0
        assert flat.size == 16

    def test_tail_block(self):
        view, _ = reshape_blocks(np.zeros((3, 3), np.float32), 2)
        assert view.num_blocks == 5 and view.tail_len == 1

    def test_round_trip_identity(self):
        rng = make_rng(0)
        h = rng.normal(size=(5, 7)).astype(np.float32)
        for g in (1, 2, 3, 7, 35, 100):
            view, flat = reshape_blocks(h, g)
            npt.assert_array_equal(unreshape_blocks(view, flat), h)

    def test_flattening_is_row_major(self):
        h = np.arange(6, dtype=np.float32).reshape(2, 3)
        _, flat = reshape_blocks(h, 4)
        npt.assert_array_equal(flat, [0, 1, 2, 3, 4, 5])


class TestBlockQuantize:
    def test_row_aligned_blocks_match_per_row_stats(self):
        rng = make_rng(1)
        h = rng.normal(size=(6, 8)).astype(np.float32)
        p_block = quantize_blockwise(h, QuantScheme(bits=2, block_size=8), make_rng(2))
        p_row = quantize_rows(h, QuantScheme(bits=2), make_rng(2))
        npt.assert_array_equal(p_block.zero_points, p_row.zero_points)
        npt.assert_array_equal(p_block.ranges, p_row.ranges)

    def test_outlier_stays_in_its_block(self):
        rng = make_rng(3)
        base = rng.normal(size=(4, 8)).astype(np.float32)
        spiked = base.copy()
        spiked[0, 1] = 1000.0  # lives in block 0 for G=8
        scheme = QuantScheme(bits=2, block_size=8)
        p_base = quantize_blockwise(base, scheme, make_rng(4))
        p_spiked = quantize_blockwise(spiked, scheme, make_rng(4))
        assert p_spiked.ranges[0] > 100
        npt.assert_array_equal(p_spiked.ranges[1:], p_base.ranges[1:])
        npt.assert_array_equal(p_spiked.zero_points[1:], p_base.zero_points[1:])

    def test_round_trip_unbiased_per_element(self):
        rng = make_rng(5)
        h = rng.normal(size=(4, 6)).astype(np.float32)
        scheme = QuantScheme(bits=2, block_size=5)  # spans rows, leaves a tail
        n_draws = 10_000
        acc = np.zeros(h.shape)
        for _ in range(n_draws):
            acc += dequantize_blockwise(quantize_blockwise(h, scheme, rng)).astype(np.float64)
        mean = acc / n_draws
        sigma_max = float(np.max(np.abs(h)) + 3) / scheme.levels / 2 / np.sqrt(n_draws)
        assert np.all(np.abs(mean - h) <= 4 * sigma_max + 1e-6)

    def test_shape_restored(self):
        rng = make_rng(6)
        h = rng.normal(size=(5, 9)).astype(np.float32)
        p = quantize_blockwise(h, QuantScheme(bits=4, block_size=7), rng)
        assert dequantize_blockwise(p).shape == h.shape

    def test_constant_matrix_exact(self):
        h = np.full((3, 5), 2.5, np.float32)
        p = quantize_blockwise(h, QuantScheme(bits=2, block_size=4), make_rng(7))
        npt.assert_array_equal(dequantize_blockwise(p), h)

    def test_codes_bounded_after_round_trip(self):
        rng = make_rng(8)
        h = (rng.random((8, 8)) * 100).astype(np.float32)
        p = quantize_blockwise(h, QuantScheme(bits=8, block_size=16), rng)
        codes = p.codes()
        assert codes.min() >= 0 and codes.max() <= 255

    def test_requires_block_scheme(self):
        with pytest.raises(ValueError):
            quantize_blockwise(np.zeros((2, 2), np.float32), QuantScheme(bits=2), make_rng(0))


class TestMemoryReport:
    def test_worked_example(self):
        rep = memory_report(16, 64, QuantScheme(bits=2, block_size=64))
        assert rep.code_bits == 2048
        assert rep.metadata_bits == 1024
        assert rep.total_bits == 3072
        assert rep.bytes == 384

    def test_fp32_ratio_one(self):
        rep = memory_report(10, 10, None)
        assert rep.ratio_vs_fp32 == 1.0
        assert rep.metadata_bits == 0

    def test_total_bits_non_increasing_in_g(self):
        totals = [memory_report(8, 128, QuantScheme(bits=2, block_size=g)).total_bits
                  for g in range(2, 65)]
        assert all(a >= b for a, b in zip(totals, totals[1:]))

    def test_diminishing_returns_doubling_g(self):
        totals = [memory_report(8, 128, QuantScheme(bits=2, block_size=g)).total_bits
                  for g in (2, 4, 8, 16, 32, 64)]
        drops = [a - b for a, b in zip(totals, totals[1:])]
        assert all(d > 0 for d in drops)
        assert all(a >= b for a, b in zip(drops, drops[1:]))

    def test_asymptote_single_group(self):
        n, r = 32, 32
        rep = memory_report(n, r, QuantScheme(bits=2, block_size=n * r))
        assert rep.total_bits == n * r * 2 + 64

    def test_per_row_groups(self):
        rep = memory_report(16, 64, QuantScheme(bits=2))
        assert rep.metadata_bits == 16 * 64


class TestSerializedSizes:
    @pytest.mark.parametrize("bits,g", [(2, 5), (2, 64), (4, 7), (8, 3)])
    def test_block_tensor_size_matches_model(self, bits, g):
        rng = make_rng(9)
        h = rng.normal(size=(6, 11)).astype(np.float32)
        p = quantize_blockwise(h, QuantScheme(bits=bits, block_size=g), rng)
        assert len(serialize(p)) == serialized_size(6, 11, p.scheme)

    def test_per_row_tensor_size_matches_model(self):
        rng = make_rng(10)
        h = rng.normal(size=(6, 11)).astype(np.float32)
        p = quantize_rows(h, QuantScheme(bits=2), rng)
        assert len(serialize(p)) == serialized_size(6, 11, p.scheme)

    def test_block_serialization_round_trip_bitwise(self):
        rng = make_rng(11)
        h = rng.normal(size=(5, 9)).astype(np.float32)
        p = quantize_blockwise(h, QuantScheme(bits=2, block_size=6), rng)
        blob = serialize(p)
        assert serialize(deserialize(blob)) == blob
