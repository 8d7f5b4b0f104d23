import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nccalign import (
    VALID,
    ZERO_VARIANCE,
    ShiftRange,
    SyntheticSpec,
    build_diag_tables,
    estimate_disparity,
    extract_diagonal,
    make_synthetic_stereo,
    ncc_diag,
    ncc_diag_fast,
    ncc_full_naive,
    partition_template,
    uniform_pattern,
)
from nccalign.ncc import OpCounter

from conftest import random_image


def oracle_diag_ncc(block, reference, origin, du, dv, orientation):
    """Independent 1D check: Pearson correlation of the two diagonals."""
    d = block.shape[0]
    k = np.arange(d)
    if orientation == "main":
        rows, cols = k, k
    else:
        rows, cols = d - 1 - k, k
    t_diag = block[rows, cols]
    x0, y0 = origin
    r_diag = reference[y0 + dv + rows, x0 + du + cols]
    return np.corrcoef(t_diag, r_diag)[0, 1]


class TestExtractDiagonal:
    BLOCK = np.arange(1, 10).reshape(3, 3) / 9.0

    def test_main_diagonal(self):
        vec = extract_diagonal(self.BLOCK, "main")
        np.testing.assert_allclose(vec.samples, np.array([1, 5, 9]) / 9.0)

    def test_anti_diagonal(self):
        vec = extract_diagonal(self.BLOCK, "anti")
        np.testing.assert_allclose(vec.samples, np.array([7, 5, 3]) / 9.0)

    def test_non_square_rejected(self):
        with pytest.raises(ValueError, match="square"):
            extract_diagonal(np.zeros((3, 4)))

    def test_unknown_orientation_rejected(self):
        with pytest.raises(ValueError, match="orientation"):
            extract_diagonal(self.BLOCK, "sideways")


class TestDiagTables:
    def test_constant_image_diag_sums(self):
        tables = build_diag_tables(np.full((8, 8), 0.5))
        for orientation in ("main", "anti"):
            for x0 in range(4):
                for y0 in range(4):
                    assert tables.window_sum(x0, y0, 4, orientation) == pytest.approx(2.0)

    def test_single_row_image(self):
        img = np.array([[0.1, 0.4, 0.9, 0.2]])
        tables = build_diag_tables(img)
        for x in range(4):
            assert tables.window_sum(x, 0, 1, "main") == pytest.approx(img[0, x])
            assert tables.window_sum(x, 0, 1, "anti") == pytest.approx(img[0, x])

    @pytest.mark.parametrize("orientation", ["main", "anti"])
    def test_window_variance_matches_direct(self, orientation):
        img = random_image(20, 32, 32)
        tables = build_diag_tables(img)
        d = 6
        k = np.arange(d)
        rows = k if orientation == "main" else d - 1 - k
        for y0 in range(0, 32 - d, 3):
            for x0 in range(0, 32 - d, 3):
                samples = img[y0 + rows, x0 + k]
                direct = np.sum((samples - samples.mean()) ** 2)
                assert tables.window_var_sum(x0, y0, d, orientation) == pytest.approx(direct, abs=1e-12)


class TestNccDiag:
    def test_perfect_match_is_one(self):
        ref = random_image(21, 24, 24)
        block = ref[4:12, 6:14].copy()
        cmap = ncc_diag(block, ref, (6, 4), ShiftRange.symmetric(3))
        assert cmap.value_at(0, 0) == pytest.approx(1.0, abs=1e-9)

    def test_interior_blocks_recover_uniform_shift(self):
        spec = SyntheticSpec(96, 96, uniform_pattern(96, 96, 3, 5), texture_seed=1)
        template, reference, _ = make_synthetic_stereo(spec)
        grid = partition_template(template, 16, 0.0)
        field = estimate_disparity(template, reference, grid, "diag", ShiftRange.symmetric(8))
        interior_du = field.du[:-1, :-1]
        interior_dv = field.dv[:-1, :-1]
        assert np.all(interior_du == 3)
        assert np.all(interior_dv == 5)

    @pytest.mark.parametrize("orientation", ["main", "anti"])
    def test_matches_pearson_oracle(self, orientation):
        shifts = ShiftRange.symmetric(2)
        for seed in range(20):
            ref = random_image(300 + seed, 16, 16)
            block = random_image(400 + seed, 6, 6)
            cmap = ncc_diag(block, ref, (5, 5), shifts, orientation)
            for dv in range(-2, 3):
                for du in range(-2, 3):
                    expected = oracle_diag_ncc(block, ref, (5, 5), du, dv, orientation)
                    assert cmap.value_at(du, dv) == pytest.approx(expected, abs=1e-9)

    def test_non_square_block_rejected(self):
        with pytest.raises(ValueError, match="square"):
            ncc_diag(np.zeros((4, 6)), np.zeros((16, 16)), (0, 0), ShiftRange(0, 0, 0, 0))


class TestNccDiagFast:
    def test_matches_ncc_diag_on_random_cases(self):
        shifts = ShiftRange.symmetric(4)
        for seed in range(25):
            ref = random_image(500 + seed, 32, 32)
            block = random_image(600 + seed, 8, 8)
            tables = build_diag_tables(ref)
            for orientation in ("main", "anti"):
                slow = ncc_diag(block, ref, (12, 12), shifts, orientation)
                fast = ncc_diag_fast(block, ref, (12, 12), shifts, tables, orientation)
                np.testing.assert_array_equal(slow.validity, fast.validity)
                assert np.abs(slow.values - fast.values).max() <= 1e-9

    def test_perfect_match_is_one(self):
        ref = random_image(22, 40, 40)
        block = ref[10:26, 12:28].copy()
        tables = build_diag_tables(ref)
        cmap = ncc_diag_fast(block, ref, (12, 10), ShiftRange.symmetric(4), tables)
        assert cmap.value_at(0, 0) == pytest.approx(1.0, abs=1e-9)

    def test_flat_diagonal_flags_while_full_ncc_works(self):
        # Textured block whose main diagonal is constant: diagonal NCC cannot
        # see any feature, full NCC can.
        ref = random_image(23, 24, 24)
        block = ref[8:16, 8:16].copy()
        d = block.shape[0]
        block[np.arange(d), np.arange(d)] = 0.5
        ref[8:16, 8:16] = block
        tables = build_diag_tables(ref)
        dmap = ncc_diag_fast(block, ref, (8, 8), ShiftRange(0, 0, 0, 0), tables)
        assert dmap.flag_at(0, 0) == ZERO_VARIANCE
        fmap = ncc_full_naive(block, ref, (8, 8), ShiftRange(0, 0, 0, 0))
        assert fmap.flag_at(0, 0) == VALID
        assert fmap.value_at(0, 0) == pytest.approx(1.0, abs=1e-9)


class TestCostModel:
    def test_diag_cost_is_block_side(self):
        ref = random_image(24, 40, 40)
        block = ref[10:26, 10:26].copy()  # 16x16
        shifts = ShiftRange.symmetric(3)
        full_counter, diag_counter = OpCounter(), OpCounter()
        ncc_full_naive(block, ref, (10, 10), shifts, counter=full_counter)
        ncc_diag(block, ref, (10, 10), shifts, counter=diag_counter)
        assert full_counter.shifts == diag_counter.shifts
        assert full_counter.multiplies // full_counter.shifts == 256
        assert diag_counter.multiplies // diag_counter.shifts == 16
        assert full_counter.multiplies // diag_counter.multiplies == 16


class TestInvariants:
    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=30, deadline=None)
    def test_coefficients_bounded(self, seed):
        ref = random_image(seed, 24, 24)
        block = random_image(seed + 90_000, 8, 8)
        tables = build_diag_tables(ref)
        cmap = ncc_diag_fast(block, ref, (8, 8), ShiftRange.symmetric(4), tables)
        assert np.all(np.abs(cmap.values[cmap.valid_mask]) <= 1.0 + 1e-9)

    @pytest.mark.parametrize("gain,offset", [(0.1, 0.0), (2.0, 0.3)])
    def test_affine_template_invariance(self, gain, offset):
        ref = random_image(25, 32, 32)
        block = ref[6:18, 8:20].copy()
        shifts = ShiftRange.symmetric(4)
        base = ncc_diag(block, ref, (8, 6), shifts)
        scaled = ncc_diag(gain * block + offset, ref, (8, 6), shifts)
        np.testing.assert_array_equal(base.validity, scaled.validity)
        assert np.abs(base.values - scaled.values).max() <= 1e-9

    def test_diag_argmax_mostly_agrees_with_full(self):
        spec = SyntheticSpec(160, 160, uniform_pattern(160, 160, 2, 3), texture_seed=31)
        template, reference, _ = make_synthetic_stereo(spec)
        grid = partition_template(template, 16, 0.0)
        shifts = ShiftRange.symmetric(4)
        f_full = estimate_disparity(template, reference, grid, "full-fast", shifts)
        f_diag = estimate_disparity(template, reference, grid, "diag-fast", shifts)
        interior = np.zeros(f_full.du.shape, dtype=bool)
        interior[:-1, :-1] = True  # last row/col blocks touch the generator's clamped band
        agree = (f_full.du == f_diag.du) & (f_full.dv == f_diag.dv)
        assert agree[interior].mean() >= 0.95
