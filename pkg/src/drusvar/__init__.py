"""Diffusion-restoration reconstruction of plane-wave ultrasound images.

The variance of a diffusion-sampled ensemble is used as an echogenicity
estimate (``DRUSvar``) alongside the ensemble mean (``DRUSmean``).
"""

from .grid import EchogenicityMap, ImageGrid, ReflectivityMap, RegionMask, RFChannelData
from .sampler import DiffusionSchedule, SamplerConfig, make_schedule, sample
from .spectral import factorize, from_spectral, to_spectral
from .variance import drus_mean, drus_var

__version__ = "0.1.0"

__all__ = [
    "DiffusionSchedule",
    "EchogenicityMap",
    "ImageGrid",
    "RFChannelData",
    "ReflectivityMap",
    "RegionMask",
    "SamplerConfig",
    "drus_mean",
    "drus_var",
    "factorize",
    "from_spectral",
    "make_schedule",
    "sample",
    "to_spectral",
]
