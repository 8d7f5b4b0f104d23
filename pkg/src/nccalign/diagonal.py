"""Diagonal NCC: the 2D block match reduced to its diagonal samples.

A square D x D block contributes only D samples per shift, cutting the
per-shift numerator cost from D^2 to D multiplies. Statistics (mean,
variance sum) are taken over the diagonal samples alone, making this a
self-consistent 1D NCC. The anti-diagonal is the fallback for blocks whose
features miss the main diagonal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .images import GrayImage, validate_image
from .ncc import (
    EPS_VAR,
    OUT_OF_BOUNDS,
    VALID,
    ZERO_VARIANCE,
    CorrelationMap,
    OpCounter,
    ShiftRange,
    _inbounds_ranges,
    block_stats,
)

ORIENTATIONS = ("main", "anti")


def _check_orientation(orientation: str) -> None:
    if orientation not in ORIENTATIONS:
        raise ValueError(f"unknown orientation {orientation!r}, expected 'main' or 'anti'")


def _check_square(block: np.ndarray) -> int:
    if block.shape[0] != block.shape[1]:
        raise ValueError(f"diagonal NCC needs a square block, got {block.shape}")
    return block.shape[0]


@dataclass(frozen=True)
class DiagVector:
    """The D diagonal samples of a square block."""

    samples: np.ndarray
    orientation: str


def extract_diagonal(block: GrayImage, orientation: str = "main") -> DiagVector:
    """Main: samples[k] = block[k, k]. Anti: samples[k] = block[D-1-k, k]."""
    _check_orientation(orientation)
    arr = validate_image(block, "block")
    d = _check_square(arr)
    if orientation == "main":
        samples = np.ascontiguousarray(np.diagonal(arr))
    else:
        samples = np.ascontiguousarray(np.diagonal(arr[::-1, :]))
    assert samples.shape == (d,)
    return DiagVector(samples=samples, orientation=orientation)


def _diag_offsets(d: int, orientation: str) -> tuple[np.ndarray, np.ndarray]:
    """Row/column offsets of the D diagonal samples within a D x D window."""
    k = np.arange(d)
    if orientation == "main":
        return k, k
    return d - 1 - k, k


@dataclass(frozen=True)
class DiagTables:
    """Prefix tables along both 45-degree directions, for O(1) diagonal stats.

    Main tables accumulate from the up-left neighbor:
    main[y + 1, x + 1] = r[y, x] + main[y, x]. Anti tables accumulate from the
    down-left neighbor: anti[y, x + 1] = r[y, x] + anti[y + 1, x]. Out-of-image
    terms are zero via padding.
    """

    main_sum: np.ndarray
    main_sumsq: np.ndarray
    anti_sum: np.ndarray
    anti_sumsq: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.main_sum.shape[0] - 1, self.main_sum.shape[1] - 1

    def window_sum(self, x0, y0, length: int, orientation: str):
        """Sum of ``length`` consecutive diagonal samples starting at (x0, y0).

        For the anti orientation the window's samples are
        r[y0 + length - 1 - k, x0 + k]. x0/y0 broadcast; two lookups each.
        """
        _check_orientation(orientation)
        x0 = np.asarray(x0)
        y0 = np.asarray(y0)
        if orientation == "main":
            return self.main_sum[y0 + length, x0 + length] - self.main_sum[y0, x0]
        return self.anti_sum[y0, x0 + length] - self.anti_sum[y0 + length, x0]

    def window_sumsq(self, x0, y0, length: int, orientation: str):
        _check_orientation(orientation)
        x0 = np.asarray(x0)
        y0 = np.asarray(y0)
        if orientation == "main":
            return self.main_sumsq[y0 + length, x0 + length] - self.main_sumsq[y0, x0]
        return self.anti_sumsq[y0, x0 + length] - self.anti_sumsq[y0 + length, x0]

    def window_var_sum(self, x0, y0, length: int, orientation: str):
        s = self.window_sum(x0, y0, length, orientation)
        sq = self.window_sumsq(x0, y0, length, orientation)
        return sq - s * s / length


def build_diag_tables(reference: GrayImage) -> DiagTables:
    arr = validate_image(reference)
    h, w = arr.shape
    sq = arr * arr

    main_sum = np.zeros((h + 1, w + 1))
    main_sumsq = np.zeros((h + 1, w + 1))
    for y in range(h):
        main_sum[y + 1, 1:] = arr[y] + main_sum[y, :-1]
        main_sumsq[y + 1, 1:] = sq[y] + main_sumsq[y, :-1]

    anti_sum = np.zeros((h + 1, w + 1))
    anti_sumsq = np.zeros((h + 1, w + 1))
    for y in range(h - 1, -1, -1):
        anti_sum[y, 1:] = arr[y] + anti_sum[y + 1, :-1]
        anti_sumsq[y, 1:] = sq[y] + anti_sumsq[y + 1, :-1]

    return DiagTables(
        main_sum=main_sum, main_sumsq=main_sumsq,
        anti_sum=anti_sum, anti_sumsq=anti_sumsq,
    )


def ncc_diag(
    template_block: GrayImage,
    reference: GrayImage,
    origin: tuple[int, int],
    shifts: ShiftRange,
    orientation: str = "main",
    counter: OpCounter | None = None,
) -> CorrelationMap:
    """Per shift, NCC restricted to the D diagonal samples of the window.

    Means and variance sums use the diagonal samples only. Flags match the
    full-NCC conventions (the whole shifted window must stay in bounds).
    """
    _check_orientation(orientation)
    t = validate_image(template_block, "template_block")
    ref = validate_image(reference, "reference")
    d = _check_square(t)
    if d > ref.shape[0] or d > ref.shape[1]:
        raise ValueError(f"template block {t.shape} larger than reference {ref.shape}")
    x0, y0 = origin

    t_diag = extract_diagonal(t, orientation).samples
    t_stats = block_stats(t_diag)
    t_c = t_diag - t_stats.mean
    t_var = t_stats.variance_sum

    row_off, col_off = _diag_offsets(d, orientation)
    values = np.zeros((shifts.n_dv, shifts.n_du))
    validity = np.full((shifts.n_dv, shifts.n_du), OUT_OF_BOUNDS, dtype=np.uint8)

    h, w = ref.shape
    for iv, dv in enumerate(range(shifts.dv_min, shifts.dv_max + 1)):
        ys = y0 + dv
        if ys < 0 or ys + d > h:
            continue
        rows = ys + row_off
        for iu, du in enumerate(range(shifts.du_min, shifts.du_max + 1)):
            xs = x0 + du
            if xs < 0 or xs + d > w:
                continue
            if counter is not None:
                counter.tally(1, d)
            r_diag = ref[rows, xs + col_off]
            r_stats = block_stats(r_diag)
            if r_stats.variance_sum < EPS_VAR or t_var < EPS_VAR:
                validity[iv, iu] = ZERO_VARIANCE
                continue
            num = float(np.sum((r_diag - r_stats.mean) * t_c))
            values[iv, iu] = num / math.sqrt(r_stats.variance_sum * t_var)
            validity[iv, iu] = VALID

    return CorrelationMap(shifts=shifts, values=values, validity=validity)


def gather_window_diagonals(
    reference: np.ndarray,
    origin: tuple[int, int],
    d: int,
    du_values: np.ndarray,
    dv_values: np.ndarray,
    orientation: str,
) -> np.ndarray:
    """Diagonal samples of every shifted window: shape (n_dv, n_du, D)."""
    x0, y0 = origin
    row_off, col_off = _diag_offsets(d, orientation)
    rows = (y0 + dv_values)[:, None] + row_off[None, :]
    cols = (x0 + du_values)[:, None] + col_off[None, :]
    return reference[rows[:, None, :], cols[None, :, :]]


def ncc_diag_fast(
    template_block: GrayImage,
    reference: GrayImage,
    origin: tuple[int, int],
    shifts: ShiftRange,
    tables: DiagTables,
    orientation: str = "main",
    counter: OpCounter | None = None,
) -> CorrelationMap:
    """Same contract as :func:`ncc_diag`; denominators via diagonal prefix tables.

    Per shift: D multiplies for the numerator plus O(1) table lookups for the
    window's diagonal sum and sum of squares.
    """
    _check_orientation(orientation)
    t = validate_image(template_block, "template_block")
    ref = validate_image(reference, "reference")
    d = _check_square(t)
    if d > ref.shape[0] or d > ref.shape[1]:
        raise ValueError(f"template block {t.shape} larger than reference {ref.shape}")
    if tables.shape != ref.shape:
        raise ValueError(f"diag tables built for {tables.shape}, reference is {ref.shape}")
    x0, y0 = origin

    t_diag = extract_diagonal(t, orientation).samples
    t_stats = block_stats(t_diag)
    t_c = t_diag - t_stats.mean
    t_var = t_stats.variance_sum

    values = np.zeros((shifts.n_dv, shifts.n_du))
    validity = np.full((shifts.n_dv, shifts.n_du), OUT_OF_BOUNDS, dtype=np.uint8)

    du_lo, du_hi, dv_lo, dv_hi = _inbounds_ranges(origin, t.shape, ref.shape, shifts)
    if du_lo > du_hi or dv_lo > dv_hi:
        return CorrelationMap(shifts=shifts, values=values, validity=validity)

    dus = np.arange(du_lo, du_hi + 1)
    dvs = np.arange(dv_lo, dv_hi + 1)
    if counter is not None:
        counter.tally(len(dus) * len(dvs), d)

    samples = gather_window_diagonals(ref, origin, d, dus, dvs, orientation)
    numerators = samples @ t_c

    r_var = tables.window_var_sum(
        (x0 + dus)[None, :], (y0 + dvs)[:, None], d, orientation
    )

    iu = slice(du_lo - shifts.du_min, du_lo - shifts.du_min + len(dus))
    iv = slice(dv_lo - shifts.dv_min, dv_lo - shifts.dv_min + len(dvs))
    ok = (r_var >= EPS_VAR) & (t_var >= EPS_VAR)
    block_values = np.zeros_like(numerators)
    np.divide(numerators, np.sqrt(np.where(ok, r_var * t_var, 1.0)), out=block_values, where=ok)
    values[iv, iu] = block_values
    validity[iv, iu] = np.where(ok, VALID, ZERO_VARIANCE).astype(np.uint8)

    return CorrelationMap(shifts=shifts, values=values, validity=validity)
