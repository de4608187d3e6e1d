"""Synthetic echogenicity phantoms and multiplicative speckle.

All random draws use numpy's PCG64 bit generator (``numpy.random.default_rng``)
so a seed fully determines a speckle realisation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import EchogenicityMap, ImageGrid, ReflectivityMap


class PhantomError(ValueError):
    pass


@dataclass(frozen=True)
class Disk:
    center_x_mm: float
    center_z_mm: float
    radius_mm: float
    inside_level: float = 0.0


@dataclass(frozen=True)
class OcclusionSpec:
    disks: tuple[Disk, ...] = ()
    background_level: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "disks", tuple(Disk(*d) if not isinstance(d, Disk) else d for d in self.disks))
        if self.background_level < 0:
            raise PhantomError("background_level must be nonnegative")
        for d in self.disks:
            if d.radius_mm <= 0:
                raise PhantomError(f"disk radius must be positive, got {d.radius_mm}")
            if d.inside_level < 0:
                raise PhantomError("inside_level must be nonnegative")


@dataclass(frozen=True)
class Scatterer:
    x_mm: float
    z_mm: float
    amplitude: float = 1.0


@dataclass(frozen=True)
class ScattererSpec:
    points: tuple[Scatterer, ...] = ()
    background_level: float = 0.0

    def __post_init__(self):
        object.__setattr__(
            self, "points", tuple(Scatterer(*p) if not isinstance(p, Scatterer) else p for p in self.points)
        )
        if self.background_level < 0:
            raise PhantomError("background_level must be nonnegative")
        for p in self.points:
            if p.amplitude <= 0:
                raise PhantomError(f"scatterer amplitude must be positive, got {p.amplitude}")


def _lattice(grid: ImageGrid, n: int) -> list[tuple[float, float]]:
    # centres at fractions (k+1)/(n+1) of each extent
    fr = (np.arange(n) + 1.0) / (n + 1.0)
    xs = grid.x_min_mm + fr * (grid.x_max_mm - grid.x_min_mm)
    zs = grid.z_min_mm + fr * (grid.z_max_mm - grid.z_min_mm)
    return [(float(x), float(z)) for z in zs for x in xs]


def default_occlusion_spec(grid: ImageGrid, n: int = 3, radius_mm: float = 2.0) -> OcclusionSpec:
    """``n x n`` anechoic disks evenly spread over the grid, background level 1."""
    return OcclusionSpec(tuple(Disk(x, z, radius_mm, 0.0) for x, z in _lattice(grid, n)), 1.0)


def default_scatterer_spec(grid: ImageGrid, n: int = 5, amplitude: float = 1.0) -> ScattererSpec:
    return ScattererSpec(tuple(Scatterer(x, z, amplitude) for x, z in _lattice(grid, n)), 0.0)


def make_occlusion_phantom(grid: ImageGrid, spec: OcclusionSpec) -> EchogenicityMap:
    """Rasterise disks onto a constant background; the first disk containing a pixel wins."""
    for d in spec.disks:
        inside = (
            grid.x_min_mm <= d.center_x_mm - d.radius_mm
            and d.center_x_mm + d.radius_mm <= grid.x_max_mm
            and grid.z_min_mm <= d.center_z_mm - d.radius_mm
            and d.center_z_mm + d.radius_mm <= grid.z_max_mm
        )
        if not inside:
            raise PhantomError(f"disk {d} does not lie inside the grid extent")
    x, z = grid.meshgrid()
    values = np.full(grid.num_pixels, float(spec.background_level))
    assigned = np.zeros(grid.num_pixels, dtype=bool)
    for d in spec.disks:
        hit = ((x - d.center_x_mm) ** 2 + (z - d.center_z_mm) ** 2 <= d.radius_mm**2) & ~assigned
        values[hit] = d.inside_level
        assigned |= hit
    return EchogenicityMap(grid, values)


def make_scatterer_phantom(grid: ImageGrid, spec: ScattererSpec) -> EchogenicityMap:
    """Point targets snapped to their nearest pixel; collisions keep the larger amplitude."""
    values = np.full(grid.num_pixels, float(spec.background_level))
    touched = np.zeros(grid.num_pixels, dtype=bool)
    for p in spec.points:
        if not grid.contains(p.x_mm, p.z_mm):
            raise PhantomError(f"scatterer at ({p.x_mm}, {p.z_mm}) mm lies outside the grid")
        i = grid.nearest_index(p.x_mm, p.z_mm)
        values[i] = p.amplitude if not touched[i] else max(values[i], p.amplitude)
        touched[i] = True
    return EchogenicityMap(grid, values)


def speckle(grid: ImageGrid, seed: int) -> np.ndarray:
    """Standard-normal multiplicative speckle field ``m`` for ``seed``."""
    return np.random.default_rng(seed).standard_normal(grid.num_pixels)


def apply_multiplicative_noise(p: EchogenicityMap, seed: int) -> ReflectivityMap:
    """Reflectivity ``o = m * p`` with ``m`` i.i.d. standard normal."""
    return ReflectivityMap(p.grid, speckle(p.grid, seed) * p.values)
