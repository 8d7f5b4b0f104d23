"""End-to-end stereo alignment: partitioning, per-block disparity, dense
interpolation, warping, and the correlation metrics, plus the intensity
perturbations used for robustness runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .diagonal import build_diag_tables, ncc_diag, ncc_diag_fast
from .errors import UnalignableError, UndefinedMetricError
from .images import GrayImage, validate_image
from .ncc import (
    OpCounter,
    ShiftRange,
    best_shift,
    build_sum_tables,
    ncc_full_fast,
    ncc_full_naive,
)
from .streaming import MovingAverageConfig, NoiseModel, ncc_stream

METHODS = ("full", "full-fast", "diag", "diag-fast", "stream")

# Per-block status codes.
BLOCK_VALID = 0
BLOCK_INTERPOLATED = 1
BLOCK_INVALID = 2

BLOCK_STATUS_NAMES = {BLOCK_VALID: "valid", BLOCK_INTERPOLATED: "interpolated", BLOCK_INVALID: "invalid"}


@dataclass(frozen=True)
class BlockGrid:
    """Regular lattice of square blocks tiling the cropped template region."""

    block_size: int
    margin_x: int
    margin_y: int
    rows: int
    cols: int

    def origin(self, row: int, col: int) -> tuple[int, int]:
        """Top-left (x, y) of a block in the uncropped template frame."""
        return self.margin_x + col * self.block_size, self.margin_y + row * self.block_size

    def origins(self):
        """Yield (row, col, x, y) for every block, row-major."""
        for row in range(self.rows):
            for col in range(self.cols):
                x, y = self.origin(row, col)
                yield row, col, x, y

    def center_coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Block-center x positions (per column) and y positions (per row)."""
        half = (self.block_size - 1) / 2.0
        cx = self.margin_x + np.arange(self.cols) * self.block_size + half
        cy = self.margin_y + np.arange(self.rows) * self.block_size + half
        return cx, cy


def partition_template(image: GrayImage, block_size: int, crop_fraction: float = 0.10) -> BlockGrid:
    """Crop margins off the template and tile the rest with whole blocks.

    ``crop_fraction`` is the total cropped fraction per axis (half per side,
    floored to whole pixels); partial blocks at the right/bottom are dropped.
    """
    arr = validate_image(image)
    if block_size < 8:
        raise ValueError(f"block_size must be >= 8, got {block_size}")
    if not (0.0 <= crop_fraction <= 0.10):
        raise ValueError(f"crop_fraction must be in [0, 0.10], got {crop_fraction}")
    h, w = arr.shape
    margin_x = int(math.floor(crop_fraction / 2 * w))
    margin_y = int(math.floor(crop_fraction / 2 * h))
    cols = (w - 2 * margin_x) // block_size
    rows = (h - 2 * margin_y) // block_size
    if rows < 1 or cols < 1:
        raise ValueError(
            f"cropped region {h - 2 * margin_y}x{w - 2 * margin_x} smaller than one {block_size} block"
        )
    return BlockGrid(block_size=block_size, margin_x=margin_x, margin_y=margin_y, rows=rows, cols=cols)


@dataclass
class DisparityField:
    """Per-block shifts; interpolated entries may be fractional."""

    du: np.ndarray
    dv: np.ndarray
    coeff: np.ndarray
    status: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.du.shape

    def copy(self) -> "DisparityField":
        return DisparityField(self.du.copy(), self.dv.copy(), self.coeff.copy(), self.status.copy())


def estimate_disparity(
    template: GrayImage,
    reference: GrayImage,
    grid: BlockGrid,
    method: str,
    shifts: ShiftRange,
    *,
    orientation: str = "main",
    ma_config: MovingAverageConfig | None = None,
    noise: NoiseModel | None = None,
    counter: OpCounter | None = None,
) -> DisparityField:
    """Run the chosen NCC variant over every block and pick its best shift.

    Blocks with no valid shift anywhere are marked invalid. Deterministic
    given the arguments (the stream method's noise is seeded per block).
    """
    t = validate_image(template, "template")
    ref = validate_image(reference, "reference")
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}, expected one of {METHODS}")
    if ref.shape[0] < t.shape[0] or ref.shape[1] < t.shape[1]:
        raise ValueError(f"reference {ref.shape} smaller than template {t.shape}")

    sum_tables = build_sum_tables(ref) if method == "full-fast" else None
    diag_tables = build_diag_tables(ref) if method in ("diag-fast", "stream") else None

    b = grid.block_size
    du = np.zeros((grid.rows, grid.cols))
    dv = np.zeros((grid.rows, grid.cols))
    coeff = np.full((grid.rows, grid.cols), np.nan)
    status = np.full((grid.rows, grid.cols), BLOCK_INVALID, dtype=np.uint8)

    for row, col, x0, y0 in grid.origins():
        block = t[y0:y0 + b, x0:x0 + b]
        origin = (x0, y0)
        if method == "full":
            cmap = ncc_full_naive(block, ref, origin, shifts, counter=counter)
        elif method == "full-fast":
            cmap = ncc_full_fast(block, ref, origin, shifts, sum_tables, counter=counter)
        elif method == "diag":
            cmap = ncc_diag(block, ref, origin, shifts, orientation, counter=counter)
        elif method == "diag-fast":
            cmap = ncc_diag_fast(block, ref, origin, shifts, diag_tables, orientation, counter=counter)
        else:
            cmap = ncc_stream(
                block, ref, origin, shifts, orientation,
                ma_config=ma_config, noise=noise, tables=diag_tables,
                block_id=row * grid.cols + col, counter=counter,
            )
        best = best_shift(cmap)
        if best is not None:
            du[row, col] = best.du
            dv[row, col] = best.dv
            coeff[row, col] = best.coeff
            status[row, col] = BLOCK_VALID

    return DisparityField(du=du, dv=dv, coeff=coeff, status=status)


def _neighbor_fill_pass(du, dv, known):
    """One Jacobi pass: mean of known 8-neighbors for each unknown cell."""
    kf = known.astype(np.float64)
    sum_du = np.zeros_like(du)
    sum_dv = np.zeros_like(dv)
    count = np.zeros_like(kf)
    rows, cols = du.shape
    padded_du = np.pad(du * kf, 1)
    padded_dv = np.pad(dv * kf, 1)
    padded_k = np.pad(kf, 1)
    for oy in (-1, 0, 1):
        for ox in (-1, 0, 1):
            if oy == 0 and ox == 0:
                continue
            sum_du += padded_du[1 + oy:1 + oy + rows, 1 + ox:1 + ox + cols]
            sum_dv += padded_dv[1 + oy:1 + oy + rows, 1 + ox:1 + ox + cols]
            count += padded_k[1 + oy:1 + oy + rows, 1 + ox:1 + ox + cols]
    fillable = (~known) & (count > 0)
    mean_du = np.zeros_like(du)
    mean_dv = np.zeros_like(dv)
    np.divide(sum_du, count, out=mean_du, where=fillable)
    np.divide(sum_dv, count, out=mean_dv, where=fillable)
    return mean_du, mean_dv, fillable


def fill_invalid(field: DisparityField) -> DisparityField:
    """Replace invalid blocks by the mean disparity of their known 8-neighbors.

    Passes iterate until every block is filled, so isolated valid regions
    propagate. Raises UnalignableError when no block is valid at all.
    """
    if not np.any(field.status == BLOCK_VALID):
        raise UnalignableError("disparity field has no valid blocks")
    out = field.copy()
    known = out.status != BLOCK_INVALID
    while not known.all():
        mean_du, mean_dv, fillable = _neighbor_fill_pass(out.du, out.dv, known)
        out.du[fillable] = mean_du[fillable]
        out.dv[fillable] = mean_dv[fillable]
        out.status[fillable] = BLOCK_INTERPOLATED
        known |= fillable
    return out


@dataclass(frozen=True)
class DenseDisparity:
    """Per-pixel real (du, dv) field."""

    du: np.ndarray
    dv: np.ndarray


def _axis_weights(centers: np.ndarray, queries: np.ndarray):
    """Lower/upper indices and blend weight for 1D linear interpolation.

    Queries are clamped to the center span, giving constant extrapolation
    beyond the first/last center.
    """
    q = np.clip(queries, centers[0], centers[-1])
    if len(centers) == 1:
        zero = np.zeros(len(q), dtype=np.int64)
        return zero, zero, np.zeros(len(q))
    idx = np.clip(np.searchsorted(centers, q, side="right") - 1, 0, len(centers) - 2)
    upper = idx + 1
    weight = (q - centers[idx]) / (centers[upper] - centers[idx])
    return idx, upper, weight


def bilinear_grid_sample(
    centers_x: np.ndarray,
    centers_y: np.ndarray,
    values: np.ndarray,
    query_x: np.ndarray,
    query_y: np.ndarray,
) -> np.ndarray:
    """Evaluate bilinear interpolation of ``values`` (len(cy) x len(cx) samples)
    at the outer product of query coordinates; constant beyond the hull."""
    j0, j1, wx = _axis_weights(np.asarray(centers_x, dtype=np.float64), np.asarray(query_x, dtype=np.float64))
    i0, i1, wy = _axis_weights(np.asarray(centers_y, dtype=np.float64), np.asarray(query_y, dtype=np.float64))
    w00 = (1.0 - wy)[:, None] * (1.0 - wx)[None, :]
    w01 = (1.0 - wy)[:, None] * wx[None, :]
    w10 = wy[:, None] * (1.0 - wx)[None, :]
    w11 = wy[:, None] * wx[None, :]
    return (
        values[np.ix_(i0, j0)] * w00
        + values[np.ix_(i0, j1)] * w01
        + values[np.ix_(i1, j0)] * w10
        + values[np.ix_(i1, j1)] * w11
    )


def interpolate_disparity(
    field: DisparityField,
    grid: BlockGrid,
    extent: tuple[int, int],
) -> DenseDisparity:
    """Bilinear interpolation of block-center disparities to a dense field.

    ``extent`` is (width, height) of the output; pixels beyond the outermost
    centers take the nearest-center value. The field must be complete
    (no invalid blocks; run fill_invalid first).
    """
    if np.any(field.status == BLOCK_INVALID):
        raise ValueError("disparity field still has invalid blocks; fill_invalid first")
    width, height = extent
    cx, cy = grid.center_coords()
    qx = np.arange(width, dtype=np.float64)
    qy = np.arange(height, dtype=np.float64)
    dense_du = bilinear_grid_sample(cx, cy, field.du, qx, qy)
    dense_dv = bilinear_grid_sample(cx, cy, field.dv, qx, qy)
    return DenseDisparity(du=dense_du, dv=dense_dv)


def warp(template: GrayImage, dense: DenseDisparity) -> tuple[GrayImage, np.ndarray]:
    """Resample the template through the dense field (inverse mapping).

    output(x, y) = template(x - du(x, y), y - dv(x, y)), bilinear. Returns
    the warped image and a validity mask; samples falling outside the
    template are masked out (and set to 0).
    """
    t = validate_image(template)
    h, w = t.shape
    if dense.du.shape != t.shape or dense.dv.shape != t.shape:
        raise ValueError(f"dense field {dense.du.shape} does not match template {t.shape}")
    ys, xs = np.indices((h, w))
    sx = xs - dense.du
    sy = ys - dense.dv
    mask = (sx >= 0) & (sx <= w - 1) & (sy >= 0) & (sy <= h - 1)

    x0 = np.clip(np.floor(sx), 0, w - 1).astype(np.int64)
    y0 = np.clip(np.floor(sy), 0, h - 1).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    wx = np.clip(sx - x0, 0.0, 1.0)
    wy = np.clip(sy - y0, 0.0, 1.0)

    out = (
        t[y0, x0] * (1.0 - wy) * (1.0 - wx)
        + t[y0, x1] * (1.0 - wy) * wx
        + t[y1, x0] * wy * (1.0 - wx)
        + t[y1, x1] * wy * wx
    )
    out[~mask] = 0.0
    return out, mask


def global_correlation(a: GrayImage, b: GrayImage, mask: np.ndarray | None = None) -> float:
    """Pearson correlation between two images over the masked pixels."""
    aa = validate_image(a, "a")
    bb = validate_image(b, "b")
    if aa.shape != bb.shape:
        raise ValueError(f"image extents differ: {aa.shape} vs {bb.shape}")
    if mask is not None:
        if mask.shape != aa.shape:
            raise ValueError(f"mask shape {mask.shape} does not match images {aa.shape}")
        av = aa[mask]
        bv = bb[mask]
    else:
        av = aa.ravel()
        bv = bb.ravel()
    if av.size < 2:
        raise UndefinedMetricError(f"correlation needs >= 2 pixels, mask selects {av.size}")
    ac = av - av.mean()
    bc = bv - bv.mean()
    var_a = float(np.sum(ac * ac))
    var_b = float(np.sum(bc * bc))
    if var_a <= 0.0 or var_b <= 0.0:
        raise UndefinedMetricError("correlation undefined: zero variance under mask")
    return float(np.sum(ac * bc)) / math.sqrt(var_a * var_b)


def improvement_percent(before: float, after: float) -> float:
    """Relative correlation improvement in percent: 100 * (after - before) / before."""
    if before == 0.0:
        raise UndefinedMetricError("improvement undefined for zero pre-alignment correlation")
    return 100.0 * (after - before) / before


def scale_intensity(image: GrayImage, factor: float) -> GrayImage:
    """Scale every pixel by ``factor`` (no clamp; NCC is scale-invariant)."""
    arr = validate_image(image)
    if not np.isfinite(factor) or factor < 0:
        raise ValueError(f"factor must be finite and >= 0, got {factor}")
    return arr * factor


def random_intensity_perturbation(image: GrayImage, seed: int, amplitude: float) -> GrayImage:
    """Multiply each pixel by a factor drawn uniformly from [1-a, 1+a].

    Deterministic per seed; the result is clamped to [0, inf).
    """
    arr = validate_image(image)
    if not (0.0 <= amplitude <= 1.0):
        raise ValueError(f"amplitude must be in [0, 1], got {amplitude}")
    factors = np.random.default_rng(seed).uniform(1.0 - amplitude, 1.0 + amplitude, size=arr.shape)
    return np.clip(arr * factors, 0.0, None)
