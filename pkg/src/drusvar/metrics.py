"""Image-quality metrics: gCNR, SNR and -6 dB FWHM, plus region helpers.

All metrics act on linear amplitude (``|img|``) unless the caller passes a
transformed image.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import ImageGrid, RegionMask, annulus_mask, disk_mask


class MetricError(ValueError):
    pass


class UndefinedMetricError(MetricError):
    pass


class UnresolvedPeakError(MetricError):
    pass


def _values(img) -> np.ndarray:
    v = img.values if hasattr(img, "values") else img
    return np.asarray(v, dtype=float).reshape(-1)


def gcnr(img, inside: RegionMask, outside: RegionMask, num_bins: int = 256) -> float:
    """``1 - sum_bins min(g_in, g_out)`` over histograms sharing the joint min-max range."""
    if num_bins < 2:
        raise MetricError("num_bins must be >= 2")
    if inside.count == 0 or outside.count == 0:
        raise MetricError("gCNR regions must be nonempty")
    if np.any(inside.member & outside.member):
        raise MetricError("gCNR regions must be disjoint")
    v = _values(img)
    a, b = v[inside.member], v[outside.member]
    return gcnr_values(a, b, num_bins)


def gcnr_values(a: np.ndarray, b: np.ndarray, num_bins: int = 256) -> float:
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    if hi == lo:
        return 0.0
    edges = np.linspace(lo, hi, num_bins + 1)
    ga, _ = np.histogram(a, bins=edges)
    gb, _ = np.histogram(b, bins=edges)
    ga = ga / ga.sum()
    gb = gb / gb.sum()
    return float(1.0 - np.minimum(ga, gb).sum())


def snr(img, roi: RegionMask) -> float:
    """Mean over population standard deviation inside ``roi``."""
    if roi.count < 2:
        raise MetricError("SNR needs at least two ROI pixels")
    v = _values(img)[roi.member]
    sd = v.std()
    if sd == 0:
        raise UndefinedMetricError("SNR undefined for a constant ROI")
    return float(v.mean() / sd)


def _half_max_crossings(profile: np.ndarray, peak: int) -> tuple[float, float]:
    half = profile[peak] / 2.0
    left = peak
    while left > 0 and profile[left] > half:
        left -= 1
    right = peak
    n = profile.size
    while right < n - 1 and profile[right] > half:
        right += 1
    if profile[left] > half or profile[right] > half:
        raise UnresolvedPeakError("profile does not drop below half maximum inside the grid")

    def cross(i_lo, i_hi):
        # i_lo is below half, i_hi above; linear interpolation between them
        y0, y1 = profile[i_lo], profile[i_hi]
        return i_lo + (half - y0) / (y1 - y0) * (i_hi - i_lo)

    return cross(left, left + 1), cross(right, right - 1)


def fwhm_profile(profile: np.ndarray, pitch_mm: float, peak: int | None = None) -> float:
    """Width between the two half-amplitude crossings of a 1-D profile, in mm."""
    profile = np.abs(np.asarray(profile, dtype=float))
    if peak is None:
        peak = int(np.argmax(profile))
    if profile[peak] <= 0:
        raise UnresolvedPeakError("peak amplitude is zero")
    lo, hi = _half_max_crossings(profile, peak)
    return float((hi - lo) * pitch_mm)


def locate_peak(img, grid: ImageGrid, peak_hint: tuple[float, float], window_mm: float = 1.0) -> tuple[int, int]:
    """``(row, col)`` of the largest ``|img|`` within ``window_mm`` of the hint."""
    a = np.abs(_values(img)).reshape(grid.shape)
    x, z = grid.x_mm, grid.z_mm
    cols = np.flatnonzero(np.abs(x - peak_hint[0]) <= window_mm)
    rows = np.flatnonzero(np.abs(z - peak_hint[1]) <= window_mm)
    if cols.size == 0 or rows.size == 0:
        raise UnresolvedPeakError("search window does not intersect the grid")
    sub = a[np.ix_(rows, cols)]
    r, c = np.unravel_index(int(np.argmax(sub)), sub.shape)
    return int(rows[r]), int(cols[c])


def fwhm(img, grid: ImageGrid, peak_hint: tuple[float, float], axis: str = "lateral", window_mm: float = 1.0) -> float:
    """-6 dB (half-amplitude) width through the peak nearest ``peak_hint``, in mm."""
    if axis not in ("axial", "lateral"):
        raise MetricError(f"axis must be 'axial' or 'lateral', got {axis!r}")
    a = np.abs(_values(img)).reshape(grid.shape)
    row, col = locate_peak(a, grid, peak_hint, window_mm)
    if axis == "lateral":
        return fwhm_profile(a[row, :], grid.dx_mm, col)
    return fwhm_profile(a[:, col], grid.dz_mm, row)


@dataclass
class MetricReport:
    name: str
    values: list[float] = field(default_factory=list)

    def add(self, value: float) -> None:
        self.values.append(float(value))

    @property
    def finite(self) -> np.ndarray:
        v = np.asarray(self.values, dtype=float)
        return v[np.isfinite(v)]

    @property
    def mean(self) -> float:
        f = self.finite
        return float(f.mean()) if f.size else float("nan")

    @property
    def std(self) -> float:
        f = self.finite
        return float(f.std()) if f.size else float("nan")


@dataclass(frozen=True)
class OcclusionRegions:
    """Inside/outside masks for one anechoic disk."""

    inside: RegionMask
    outside: RegionMask


def occlusion_regions(
    grid: ImageGrid,
    cx_mm: float,
    cz_mm: float,
    radius_mm: float,
    erosion: float = 0.10,
    annulus: tuple[float, float] = (1.25, 1.6),
) -> OcclusionRegions:
    """Inside = disk eroded by ``erosion``; outside = annulus between the given radius multiples."""
    inside = disk_mask(grid, cx_mm, cz_mm, radius_mm * (1.0 - erosion))
    outside = annulus_mask(grid, cx_mm, cz_mm, radius_mm * annulus[0], radius_mm * annulus[1])
    return OcclusionRegions(inside, outside)
