"""Full 2D normalized cross correlation, baseline and sum-table accelerated.

The correlation coefficient for a template block t against the reference
window at shift (du, dv) is the zero-mean cross product divided by the
square root of the product of the two variance sums. Windows that leave the
reference are flagged out-of-bounds; windows (or templates) whose variance
sum falls below ``EPS_VAR`` are flagged zero-variance instead of dividing
by ~0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import correlate2d

from .images import GrayImage, validate_image

# Variance-sum threshold (on [0,1]-normalized intensities) below which a
# window is treated as featureless.
EPS_VAR = 1e-12

# Per-shift validity codes.
VALID = 0
ZERO_VARIANCE = 1
OUT_OF_BOUNDS = 2

FLAG_NAMES = {VALID: "valid", ZERO_VARIANCE: "zero-variance", OUT_OF_BOUNDS: "out-of-bounds"}


@dataclass
class OpCounter:
    """Tally of numerator work, for cost-model comparisons.

    Counts reflect the dense per-shift numerator cost (window size multiplies
    and adds per evaluated in-bounds shift), independent of zero-variance
    short-circuits, so naive and accelerated variants tally identically.
    """

    multiplies: int = 0
    adds: int = 0
    shifts: int = 0

    def tally(self, shifts: int, per_shift: int) -> None:
        self.shifts += shifts
        self.multiplies += shifts * per_shift
        self.adds += shifts * per_shift


@dataclass(frozen=True)
class ShiftRange:
    """Inclusive search window of horizontal (du) and vertical (dv) shifts."""

    du_min: int
    du_max: int
    dv_min: int
    dv_max: int

    def __post_init__(self):
        if self.du_min > self.du_max or self.dv_min > self.dv_max:
            raise ValueError(f"degenerate shift range {self}")

    @classmethod
    def symmetric(cls, du_radius: int, dv_radius: int | None = None) -> "ShiftRange":
        if dv_radius is None:
            dv_radius = du_radius
        return cls(-du_radius, du_radius, -dv_radius, dv_radius)

    @property
    def n_du(self) -> int:
        return self.du_max - self.du_min + 1

    @property
    def n_dv(self) -> int:
        return self.dv_max - self.dv_min + 1

    def du_values(self) -> np.ndarray:
        return np.arange(self.du_min, self.du_max + 1)

    def dv_values(self) -> np.ndarray:
        return np.arange(self.dv_min, self.dv_max + 1)

    def contains(self, du: int, dv: int) -> bool:
        return self.du_min <= du <= self.du_max and self.dv_min <= dv <= self.dv_max


@dataclass(frozen=True)
class BlockStats:
    """Mean and zero-mean variance sum of one block."""

    mean: float
    variance_sum: float


def block_stats(values: np.ndarray) -> BlockStats:
    """Two-pass mean and sum of squared deviations."""
    mean = float(np.mean(values))
    centered = np.asarray(values, dtype=np.float64) - mean
    return BlockStats(mean=mean, variance_sum=float(np.sum(centered * centered)))


@dataclass
class CorrelationMap:
    """C(du, dv) over a shift range, with per-shift validity flags.

    ``values`` and ``validity`` are indexed [dv - dv_min, du - du_min].
    ``clamped`` marks shifts whose streaming value was pulled back into
    [-1, 1]; it stays None for exact variants.
    """

    shifts: ShiftRange
    values: np.ndarray
    validity: np.ndarray
    clamped: np.ndarray | None = None

    def _index(self, du: int, dv: int) -> tuple[int, int]:
        if not self.shifts.contains(du, dv):
            raise ValueError(f"shift ({du}, {dv}) outside search range {self.shifts}")
        return dv - self.shifts.dv_min, du - self.shifts.du_min

    def value_at(self, du: int, dv: int) -> float:
        iv, iu = self._index(du, dv)
        return float(self.values[iv, iu])

    def flag_at(self, du: int, dv: int) -> int:
        iv, iu = self._index(du, dv)
        return int(self.validity[iv, iu])

    @property
    def valid_mask(self) -> np.ndarray:
        return self.validity == VALID


@dataclass(frozen=True)
class BestShift:
    du: int
    dv: int
    coeff: float


@dataclass(frozen=True)
class SumTables:
    """Padded prefix tables of reference intensities and their squares.

    ``table[y + 1, x + 1]`` holds the sum over the rectangle [0..x] x [0..y],
    so any window sum costs 4 lookups.
    """

    sum_table: np.ndarray
    sumsq_table: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.sum_table.shape[0] - 1, self.sum_table.shape[1] - 1

    @property
    def running_sum(self) -> np.ndarray:
        return self.sum_table[1:, 1:]

    @property
    def running_sumsq(self) -> np.ndarray:
        return self.sumsq_table[1:, 1:]

    def window_sum(self, x0, y0, width: int, height: int):
        """Sum over windows with top-left (x0, y0); x0/y0 broadcast."""
        return _window_lookup(self.sum_table, x0, y0, width, height)

    def window_sumsq(self, x0, y0, width: int, height: int):
        return _window_lookup(self.sumsq_table, x0, y0, width, height)

    def window_var_sum(self, x0, y0, width: int, height: int):
        """Sum of squared deviations from the window mean: sumsq - sum^2 / n."""
        n = width * height
        s = self.window_sum(x0, y0, width, height)
        sq = self.window_sumsq(x0, y0, width, height)
        return sq - s * s / n


def _window_lookup(table: np.ndarray, x0, y0, width: int, height: int):
    x0 = np.asarray(x0)
    y0 = np.asarray(y0)
    return (
        table[y0 + height, x0 + width]
        - table[y0, x0 + width]
        - table[y0 + height, x0]
        + table[y0, x0]
    )


def build_sum_tables(image: GrayImage) -> SumTables:
    """Prefix tables over the image; O(1) window sums and variances after."""
    arr = validate_image(image)
    h, w = arr.shape
    sum_table = np.zeros((h + 1, w + 1))
    sumsq_table = np.zeros((h + 1, w + 1))
    sum_table[1:, 1:] = np.cumsum(np.cumsum(arr, axis=0), axis=1)
    sumsq_table[1:, 1:] = np.cumsum(np.cumsum(arr * arr, axis=0), axis=1)
    return SumTables(sum_table=sum_table, sumsq_table=sumsq_table)


def _inbounds_ranges(
    origin: tuple[int, int],
    block_shape: tuple[int, int],
    ref_shape: tuple[int, int],
    shifts: ShiftRange,
) -> tuple[int, int, int, int]:
    """Clip the shift range so the shifted window stays inside the reference.

    Returns (du_lo, du_hi, dv_lo, dv_hi); empty when lo > hi.
    """
    x0, y0 = origin
    th, tw = block_shape
    h, w = ref_shape
    du_lo = max(shifts.du_min, -x0)
    du_hi = min(shifts.du_max, w - tw - x0)
    dv_lo = max(shifts.dv_min, -y0)
    dv_hi = min(shifts.dv_max, h - th - y0)
    return du_lo, du_hi, dv_lo, dv_hi


def _check_template_fits(template: np.ndarray, reference: np.ndarray) -> None:
    if template.shape[0] > reference.shape[0] or template.shape[1] > reference.shape[1]:
        raise ValueError(
            f"template block {template.shape} larger than reference {reference.shape}"
        )


def ncc_full_naive(
    template_block: GrayImage,
    reference: GrayImage,
    origin: tuple[int, int],
    shifts: ShiftRange,
    counter: OpCounter | None = None,
) -> CorrelationMap:
    """Direct evaluation: per shift, two-pass window mean and explicit sums."""
    t = validate_image(template_block, "template_block")
    ref = validate_image(reference, "reference")
    _check_template_fits(t, ref)
    th, tw = t.shape
    h, w = ref.shape
    x0, y0 = origin

    t_stats = block_stats(t)
    t_c = t - t_stats.mean
    t_var = t_stats.variance_sum

    values = np.zeros((shifts.n_dv, shifts.n_du))
    validity = np.full((shifts.n_dv, shifts.n_du), OUT_OF_BOUNDS, dtype=np.uint8)

    for iv, dv in enumerate(range(shifts.dv_min, shifts.dv_max + 1)):
        ys = y0 + dv
        if ys < 0 or ys + th > h:
            continue
        for iu, du in enumerate(range(shifts.du_min, shifts.du_max + 1)):
            xs = x0 + du
            if xs < 0 or xs + tw > w:
                continue
            if counter is not None:
                counter.tally(1, th * tw)
            window = ref[ys:ys + th, xs:xs + tw]
            w_stats = block_stats(window)
            if w_stats.variance_sum < EPS_VAR or t_var < EPS_VAR:
                validity[iv, iu] = ZERO_VARIANCE
                continue
            w_c = window - w_stats.mean
            num = float(np.sum(w_c * t_c))
            values[iv, iu] = num / math.sqrt(w_stats.variance_sum * t_var)
            validity[iv, iu] = VALID

    return CorrelationMap(shifts=shifts, values=values, validity=validity)


def ncc_full_fast(
    template_block: GrayImage,
    reference: GrayImage,
    origin: tuple[int, int],
    shifts: ShiftRange,
    tables: SumTables,
    counter: OpCounter | None = None,
) -> CorrelationMap:
    """Sum-table variant: same contract as :func:`ncc_full_naive`.

    Window means/variances come from the prefix tables; the numerator uses
    sum(r * (t - t_mean)), exact because the centered template sums to zero,
    evaluated as one direct cross-correlation sweep over the in-bounds shifts.
    """
    t = validate_image(template_block, "template_block")
    ref = validate_image(reference, "reference")
    _check_template_fits(t, ref)
    if tables.shape != ref.shape:
        raise ValueError(f"sum tables built for {tables.shape}, reference is {ref.shape}")
    th, tw = t.shape
    x0, y0 = origin

    t_stats = block_stats(t)
    t_c = t - t_stats.mean
    t_var = t_stats.variance_sum

    values = np.zeros((shifts.n_dv, shifts.n_du))
    validity = np.full((shifts.n_dv, shifts.n_du), OUT_OF_BOUNDS, dtype=np.uint8)

    du_lo, du_hi, dv_lo, dv_hi = _inbounds_ranges(origin, t.shape, ref.shape, shifts)
    if du_lo > du_hi or dv_lo > dv_hi:
        return CorrelationMap(shifts=shifts, values=values, validity=validity)

    n_du_in = du_hi - du_lo + 1
    n_dv_in = dv_hi - dv_lo + 1
    if counter is not None:
        counter.tally(n_du_in * n_dv_in, th * tw)

    region = ref[y0 + dv_lo:y0 + dv_hi + th, x0 + du_lo:x0 + du_hi + tw]
    numerators = correlate2d(region, t_c, mode="valid")

    xs = x0 + np.arange(du_lo, du_hi + 1)
    ys = y0 + np.arange(dv_lo, dv_hi + 1)
    r_var = tables.window_var_sum(xs[None, :], ys[:, None], tw, th)

    iu = slice(du_lo - shifts.du_min, du_lo - shifts.du_min + n_du_in)
    iv = slice(dv_lo - shifts.dv_min, dv_lo - shifts.dv_min + n_dv_in)
    ok = (r_var >= EPS_VAR) & (t_var >= EPS_VAR)
    block_values = np.zeros_like(numerators)
    np.divide(numerators, np.sqrt(np.where(ok, r_var * t_var, 1.0)), out=block_values, where=ok)
    values[iv, iu] = block_values
    validity[iv, iu] = np.where(ok, VALID, ZERO_VARIANCE).astype(np.uint8)

    return CorrelationMap(shifts=shifts, values=values, validity=validity)


def best_shift(cmap: CorrelationMap) -> BestShift | None:
    """Valid shift maximizing C; ties prefer smaller du^2+dv^2, then dv, then du.

    Returns None when every shift is flagged.
    """
    valid = cmap.valid_mask
    if not valid.any():
        return None
    vmax = cmap.values[valid].max()
    candidates = np.argwhere(valid & (cmap.values == vmax))
    best_key = None
    best = None
    for iv, iu in candidates:
        du = int(iu) + cmap.shifts.du_min
        dv = int(iv) + cmap.shifts.dv_min
        key = (du * du + dv * dv, dv, du)
        if best_key is None or key < best_key:
            best_key = key
            best = (du, dv)
    return BestShift(du=best[0], dv=best[1], coeff=float(vmax))
