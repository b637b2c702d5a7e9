"""Quality measures (relative error, CNR, SNR, segmentation error) and the
B-scan vertical alignment pre-processing step.

SNR has no standard definition in this setting; the one here is the common
OCT convention, peak signal over background standard deviation in dB.
Segmentation error normalizes surface-position differences by the total
thickness taken from the manual surface set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tensor import DenseTensor, as_tensor

__all__ = [
    "RegionMask",
    "SurfaceSet",
    "relative_error",
    "cnr",
    "snr",
    "segmentation_error",
    "align_bscans",
]


@dataclass(frozen=True)
class RegionMask:
    """Boolean voxel mask congruent with the volume it selects from."""

    mask: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "mask", np.asarray(self.mask, dtype=bool))

    @property
    def count(self) -> int:
        return int(self.mask.sum())


def _mask_values(x: DenseTensor, region, what: str) -> np.ndarray:
    mask = region.mask if isinstance(region, RegionMask) else np.asarray(region, bool)
    if mask.shape != x.dims:
        raise ValueError(f"{what} mask shape {mask.shape} != volume dims {x.dims}")
    values = x.array[mask]
    if values.size == 0:
        raise ValueError(f"{what} mask selects no voxels")
    return values


def relative_error(x, xhat) -> float:
    """Frobenius distance between the volumes over the norm of the first."""
    x = as_tensor(x)
    xhat = as_tensor(xhat)
    if x.dims != xhat.dims:
        raise ValueError(f"dims differ: {x.dims} vs {xhat.dims}")
    ref = x.norm()
    if ref == 0.0:
        raise ValueError("reference volume has zero norm")
    return float(np.linalg.norm(xhat.array - x.array) / ref)


def cnr(x, region) -> float:
    """Mean over standard deviation (population) of a homogeneous region;
    the inverse of the speckle fluctuation there."""
    values = _mask_values(as_tensor(x), region, "region")
    sigma = float(values.std())
    if sigma == 0.0:
        raise ValueError("region has zero variance; CNR undefined")
    return float(values.mean() / sigma)


def snr(x, signal, background) -> float:
    """Peak signal over background standard deviation, in dB."""
    x = as_tensor(x)
    peak = float(_mask_values(x, signal, "signal").max())
    sigma = float(_mask_values(x, background, "background").std())
    if sigma == 0.0:
        raise ValueError("background has zero variance; SNR undefined")
    if peak <= 0.0:
        raise ValueError("signal peak must be positive for a dB ratio")
    return 20.0 * math.log10(peak / sigma)


@dataclass(frozen=True)
class SurfaceSet:
    """L surface positions over a (column, B-scan) grid.

    ``positions[l, i2, s]`` is the vertical (first-mode) position of surface
    ``l+1`` at column ``i2+1`` of B-scan ``scan_indices[s]``; positions are
    1-based rows and may be fractional.
    """

    positions: np.ndarray
    scan_indices: tuple[int, ...]

    def __post_init__(self) -> None:
        pos = np.asarray(self.positions, dtype=np.float64)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(
            self, "scan_indices", tuple(int(s) for s in self.scan_indices)
        )
        if pos.ndim != 3:
            raise ValueError("positions must be (surfaces, columns, scans)")
        if pos.shape[2] != len(self.scan_indices):
            raise ValueError("one scan index per scan slice required")
        if len(set(self.scan_indices)) != len(self.scan_indices):
            raise ValueError("scan indices must be unique")
        if not np.isfinite(pos).all() or (pos < 1.0).any():
            raise ValueError("surface positions must be finite and >= 1")

    @property
    def n_surfaces(self) -> int:
        return self.positions.shape[0]

    def thickness(self) -> np.ndarray:
        """Total thickness per (column, scan): outermost surface spread."""
        return self.positions.max(axis=0) - self.positions.min(axis=0)


def segmentation_error(auto: SurfaceSet, manual: SurfaceSet, bscan_subset=None) -> float:
    """Thickness-normalized mean absolute vertical surface difference.

    Averages |auto - manual| / thickness over all columns, the selected
    B-scans, and all surfaces; thickness comes from the manual set.
    """
    if auto.positions.shape != manual.positions.shape:
        raise ValueError(
            f"surface grids differ: {auto.positions.shape} vs {manual.positions.shape}"
        )
    if auto.scan_indices != manual.scan_indices:
        raise ValueError("surface sets cover different B-scans")
    if bscan_subset is None:
        subset = list(range(len(manual.scan_indices)))
    else:
        wanted = [int(b) for b in bscan_subset]
        missing = set(wanted) - set(manual.scan_indices)
        if missing:
            raise ValueError(f"B-scans {sorted(missing)} not present in the sets")
        subset = [manual.scan_indices.index(b) for b in wanted]
        if not subset:
            raise ValueError("empty B-scan subset")
    thickness = manual.thickness()[:, subset]
    if (thickness <= 0).any():
        raise ValueError("manual set has nonpositive thickness somewhere")
    diff = np.abs(auto.positions[:, :, subset] - manual.positions[:, :, subset])
    return float(np.mean(diff / thickness[None, :, :]))


def align_bscans(x, boundary_heights) -> DenseTensor:
    """Shift each B-scan vertically so the peripheral upper-boundary heights
    agree with their mean across scans.

    ``boundary_heights`` holds the upper-boundary row per column and scan,
    shape (I2, I3). Per scan, the mean height over the leftmost and
    rightmost 20% of columns (the fovea-free periphery) is compared with the
    across-scan mean; the scan is shifted by the rounded difference with
    zeros filling vacated rows.
    """
    t = as_tensor(x)
    if t.order != 3:
        raise ValueError(f"expected a 3-way volume, got order {t.order}")
    i1, i2, i3 = t.dims
    heights = np.asarray(boundary_heights, dtype=np.float64)
    if heights.shape != (i2, i3):
        raise ValueError(
            f"boundary heights must have shape {(i2, i3)}, got {heights.shape}"
        )
    if not np.isfinite(heights).all():
        raise ValueError("boundary heights contain missing values")
    edge = max(1, int(round(0.2 * i2)))
    peripheral = np.r_[0:edge, i2 - edge : i2]
    per_scan = heights[peripheral, :].mean(axis=0)
    shifts = np.rint(per_scan.mean() - per_scan).astype(int)
    return DenseTensor._wrap_owned(_apply_shifts(t.array, shifts))


def _apply_shifts(arr: np.ndarray, shifts) -> np.ndarray:
    """Shift each B-scan vertically by its integer offset, zero-filling."""
    i1 = arr.shape[0]
    shifts = np.asarray(shifts, dtype=int)
    if shifts.shape != (arr.shape[2],):
        raise ValueError("one shift per B-scan required")
    if (np.abs(shifts) >= i1).any():
        raise ValueError("alignment shift exceeds volume height")
    out = np.zeros(arr.shape, order="F")
    for b, s in enumerate(shifts):
        if s >= 0:
            out[s:i1, :, b] = arr[0 : i1 - s, :, b]
        else:
            out[0 : i1 + s, :, b] = arr[-s:i1, :, b]
    return out
