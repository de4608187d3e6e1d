"""Experiment configuration read from TOML.

Every key is optional; missing keys take the defaults below. Example::

    [grid]
    size = 128                      # square grid, pixels per side
    x_range_mm = [-18.0, 18.0]
    z_range_mm = [10.0, 46.0]

    [phantom]
    kind = "occlusion"              # or "scatterer"
    lattice = 3                     # n x n disks / points
    radius_mm = 2.0                 # occlusion disks
    seeds = [0, 1, 2, 3, 4, 5, 6, 7, 8]

    [operator]
    kind = "separable"              # or "dense" (full H and B, small grids only)
    sigma_mm = 0.17
    num_elements = 32               # dense only
    tukey_alpha = 0.25
    f_number = 1.4

    [sampler]
    samples = 10
    steps = 50
    eta = 0.85
    eta_b = 1.0
    threshold_scale = 2.0
    beta = 0.5

    [experiment]
    noise_std = [0.02, 0.08]
    output_dir = "runs/occlusion"
    dynamic_range_db = 60.0

    [metrics]
    num_bins = 256
    erosion = 0.10
    annulus = [1.25, 1.6]
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .grid import ImageGrid


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    grid: ImageGrid = field(default_factory=lambda: ImageGrid.picmus(128))
    phantom: str = "occlusion"
    lattice: int = 0
    radius_mm: float = 2.0
    amplitude: float = 1.0
    seeds: tuple[int, ...] = tuple(range(9))
    operator: str = "separable"
    sigma_mm: float = 0.17
    num_elements: int = 32
    tukey_alpha: float = 0.25
    f_number: float = 1.4
    samples: int = 10
    steps: int = 50
    eta: float = 0.85
    eta_b: float = 1.0
    threshold_scale: float = 2.0
    beta: float = 0.5
    noise_std: tuple[float, ...] = (0.02, 0.08)
    output_dir: str = "runs/experiment"
    dynamic_range_db: float = 60.0
    num_bins: int = 256
    erosion: float = 0.10
    annulus: tuple[float, float] = (1.25, 1.6)
    write_images: bool = True

    def __post_init__(self):
        if self.phantom not in ("occlusion", "scatterer"):
            raise ConfigError(f"unknown phantom kind {self.phantom!r}")
        if self.operator not in ("separable", "dense"):
            raise ConfigError(f"unknown operator kind {self.operator!r}")
        if len(self.noise_std) == 0:
            raise ConfigError("noise_std list is empty")
        if any(s < 0 for s in self.noise_std):
            raise ConfigError("noise_std values must be nonnegative")
        if len(self.seeds) == 0:
            raise ConfigError("need at least one speckle seed")
        if self.samples < 2:
            raise ConfigError("need at least two samples per ensemble")

    @property
    def lattice_size(self) -> int:
        if self.lattice:
            return self.lattice
        return 3 if self.phantom == "occlusion" else 5

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


_SECTIONS = {
    "grid": {"size", "x_range_mm", "z_range_mm"},
    "phantom": {"kind", "lattice", "radius_mm", "amplitude", "seeds"},
    "operator": {"kind", "sigma_mm", "num_elements", "tukey_alpha", "f_number"},
    "sampler": {"samples", "steps", "eta", "eta_b", "threshold_scale", "beta"},
    "experiment": {"noise_std", "output_dir", "dynamic_range_db", "write_images"},
    "metrics": {"num_bins", "erosion", "annulus"},
}


def parse_config(doc: dict) -> ExperimentConfig:
    for section, body in doc.items():
        if section not in _SECTIONS or not isinstance(body, dict):
            raise ConfigError(f"unknown config section [{section}]")
        unknown = set(body) - _SECTIONS[section]
        if unknown:
            raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
    g = doc.get("grid", {})
    size = int(g.get("size", 128))
    xr = g.get("x_range_mm", [-18.0, 18.0])
    zr = g.get("z_range_mm", [10.0, 46.0])
    kw = {"grid": ImageGrid(size, size, float(xr[0]), float(xr[1]), float(zr[0]), float(zr[1]))}
    ph = doc.get("phantom", {})
    op = doc.get("operator", {})
    sm = doc.get("sampler", {})
    ex = doc.get("experiment", {})
    me = doc.get("metrics", {})
    mapping = [
        (ph, "kind", "phantom", str),
        (ph, "lattice", "lattice", int),
        (ph, "radius_mm", "radius_mm", float),
        (ph, "amplitude", "amplitude", float),
        (ph, "seeds", "seeds", lambda v: tuple(int(s) for s in v)),
        (op, "kind", "operator", str),
        (op, "sigma_mm", "sigma_mm", float),
        (op, "num_elements", "num_elements", int),
        (op, "tukey_alpha", "tukey_alpha", float),
        (op, "f_number", "f_number", float),
        (sm, "samples", "samples", int),
        (sm, "steps", "steps", int),
        (sm, "eta", "eta", float),
        (sm, "eta_b", "eta_b", float),
        (sm, "threshold_scale", "threshold_scale", float),
        (sm, "beta", "beta", float),
        (ex, "noise_std", "noise_std", lambda v: tuple(float(s) for s in v)),
        (ex, "output_dir", "output_dir", str),
        (ex, "dynamic_range_db", "dynamic_range_db", float),
        (ex, "write_images", "write_images", bool),
        (me, "num_bins", "num_bins", int),
        (me, "erosion", "erosion", float),
        (me, "annulus", "annulus", lambda v: (float(v[0]), float(v[1]))),
    ]
    for section, key, attr, conv in mapping:
        if key in section:
            try:
                kw[attr] = conv(section[key])
            except (TypeError, ValueError, IndexError) as exc:
                raise ConfigError(f"bad value for {key!r}: {section[key]!r}") from exc
    return ExperimentConfig(**kw)


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    path = Path(path)
    with open(path, "rb") as fh:
        try:
            doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(doc)
