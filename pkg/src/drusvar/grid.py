"""Image grid and the array-bearing map types shared by every module.

Pixels are stored row-major with the axial (depth) index varying slowest, so a
flat index ``i`` maps to ``(row, col) = divmod(i, width_px)``. Extents are in
millimetres, sampled endpoint-inclusive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _frozen_array(values, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ImageGrid:
    width_px: int
    depth_px: int
    x_min_mm: float
    x_max_mm: float
    z_min_mm: float
    z_max_mm: float

    def __post_init__(self):
        if int(self.width_px) < 2 or int(self.depth_px) < 2:
            raise ValueError("grid needs at least 2 pixels along each axis")
        if not self.x_max_mm > self.x_min_mm:
            raise ValueError("x_max_mm must exceed x_min_mm")
        if not self.z_max_mm > self.z_min_mm:
            raise ValueError("z_max_mm must exceed z_min_mm")
        object.__setattr__(self, "width_px", int(self.width_px))
        object.__setattr__(self, "depth_px", int(self.depth_px))

    @classmethod
    def picmus(cls, size: int = 256) -> "ImageGrid":
        """Square grid over the in-vitro field of view (x in [-18, 18], z in [10, 46] mm)."""
        return cls(size, size, -18.0, 18.0, 10.0, 46.0)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.depth_px, self.width_px)

    @property
    def num_pixels(self) -> int:
        return self.width_px * self.depth_px

    @property
    def dx_mm(self) -> float:
        return (self.x_max_mm - self.x_min_mm) / (self.width_px - 1)

    @property
    def dz_mm(self) -> float:
        return (self.z_max_mm - self.z_min_mm) / (self.depth_px - 1)

    @property
    def x_mm(self) -> np.ndarray:
        return self.x_min_mm + self.dx_mm * np.arange(self.width_px)

    @property
    def z_mm(self) -> np.ndarray:
        return self.z_min_mm + self.dz_mm * np.arange(self.depth_px)

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        """Flat (x, z) coordinates of every pixel, in storage order."""
        zz, xx = np.meshgrid(self.z_mm, self.x_mm, indexing="ij")
        return xx.reshape(-1), zz.reshape(-1)

    def contains(self, x_mm: float, z_mm: float) -> bool:
        return (self.x_min_mm <= x_mm <= self.x_max_mm) and (self.z_min_mm <= z_mm <= self.z_max_mm)

    def nearest_index(self, x_mm: float, z_mm: float) -> int:
        col = int(np.clip(np.floor((x_mm - self.x_min_mm) / self.dx_mm + 0.5), 0, self.width_px - 1))
        row = int(np.clip(np.floor((z_mm - self.z_min_mm) / self.dz_mm + 0.5), 0, self.depth_px - 1))
        return row * self.width_px + col


def pixel_position(grid: ImageGrid, index: int) -> tuple[float, float]:
    """Physical centre ``(x_mm, z_mm)`` of the pixel at flat ``index``."""
    if not 0 <= index < grid.num_pixels:
        raise IndexError(f"pixel index {index} out of range [0, {grid.num_pixels})")
    row, col = divmod(int(index), grid.width_px)
    return grid.x_min_mm + col * grid.dx_mm, grid.z_min_mm + row * grid.dz_mm


@dataclass(frozen=True)
class EchogenicityMap:
    grid: ImageGrid
    values: np.ndarray

    def __post_init__(self):
        values = _frozen_array(self.values)
        if values.size != self.grid.num_pixels:
            raise ValueError(f"expected {self.grid.num_pixels} values, got {values.size}")
        if not np.all(values >= 0):
            raise ValueError("echogenicity must be nonnegative")
        object.__setattr__(self, "values", values)

    def image(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)


@dataclass(frozen=True)
class ReflectivityMap:
    grid: ImageGrid
    values: np.ndarray

    def __post_init__(self):
        values = _frozen_array(self.values)
        if values.size != self.grid.num_pixels:
            raise ValueError(f"expected {self.grid.num_pixels} values, got {values.size}")
        object.__setattr__(self, "values", values)

    def image(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)


@dataclass(frozen=True)
class RFChannelData:
    """Per-element RF traces stacked element-major: element ``j`` owns ``values[j*K:(j+1)*K]``."""

    num_elements: int
    num_time_samples: int
    sampling_rate_hz: float
    values: np.ndarray

    def __post_init__(self):
        values = _frozen_array(self.values)
        if self.num_elements < 1 or self.num_time_samples < 1:
            raise ValueError("need at least one element and one time sample")
        if values.size != self.num_elements * self.num_time_samples:
            raise ValueError(
                f"expected K*L = {self.num_elements * self.num_time_samples} samples, got {values.size}"
            )
        if not self.sampling_rate_hz > 0:
            raise ValueError("sampling_rate_hz must be positive")
        object.__setattr__(self, "values", values)

    def traces(self) -> np.ndarray:
        """View as ``(L, K)``."""
        return self.values.reshape(self.num_elements, self.num_time_samples)


@dataclass(frozen=True)
class RegionMask:
    grid: ImageGrid
    member: np.ndarray = field(repr=False)

    def __post_init__(self):
        member = _frozen_array(self.member, dtype=bool)
        if member.size != self.grid.num_pixels:
            raise ValueError(f"expected {self.grid.num_pixels} mask entries, got {member.size}")
        object.__setattr__(self, "member", member)

    @property
    def count(self) -> int:
        return int(self.member.sum())

    def __and__(self, other: "RegionMask") -> "RegionMask":
        return RegionMask(self.grid, self.member & other.member)

    def __or__(self, other: "RegionMask") -> "RegionMask":
        return RegionMask(self.grid, self.member | other.member)


def disk_mask(grid: ImageGrid, cx_mm: float, cz_mm: float, radius_mm: float) -> RegionMask:
    x, z = grid.meshgrid()
    return RegionMask(grid, (x - cx_mm) ** 2 + (z - cz_mm) ** 2 <= radius_mm**2)


def annulus_mask(grid: ImageGrid, cx_mm: float, cz_mm: float, r_inner_mm: float, r_outer_mm: float) -> RegionMask:
    x, z = grid.meshgrid()
    d2 = (x - cx_mm) ** 2 + (z - cz_mm) ** 2
    return RegionMask(grid, (d2 >= r_inner_mm**2) & (d2 <= r_outer_mm**2))
