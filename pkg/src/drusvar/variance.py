"""Ensemble estimators: the sample mean and the variance-based echogenicity map.

Restored samples are modelled as ``o_c = m * p + p**beta * G_c`` with a shared
speckle field ``m`` and fresh standard-normal ``G_c`` per sample, so that the
per-pixel sample variance estimates ``p**(2 beta)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .grid import EchogenicityMap, ImageGrid, ReflectivityMap
from .phantom import speckle


class EnsembleError(ValueError):
    pass


@dataclass(frozen=True)
class VarianceModelParams:
    beta: float = 0.5

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")


@dataclass(frozen=True)
class SampleEnsemble:
    samples: tuple[ReflectivityMap, ...]

    def __post_init__(self):
        samples = tuple(self.samples)
        if samples and any(s.grid != samples[0].grid for s in samples):
            raise EnsembleError("all samples must share one grid")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def grid(self) -> ImageGrid:
        if not self.samples:
            raise EnsembleError("empty ensemble has no grid")
        return self.samples[0].grid

    def stack(self) -> np.ndarray:
        """``(C, N)`` array of sample values."""
        return np.stack([s.values for s in self.samples])


def drus_mean(ens: SampleEnsemble) -> ReflectivityMap:
    if len(ens) < 1:
        raise EnsembleError("mean needs at least one sample")
    return ReflectivityMap(ens.grid, ens.stack().mean(axis=0))


def variance_to_echogenicity(unbiased_var: np.ndarray, beta: float) -> np.ndarray:
    return np.power(np.maximum(unbiased_var, 0.0), 1.0 / (2.0 * beta))


def drus_var(ens: SampleEnsemble, params: VarianceModelParams = VarianceModelParams()) -> EchogenicityMap:
    """``[sum_c |o_c - mean|^2 / (C - 1)] ** (1 / (2 beta))`` per pixel."""
    if len(ens) < 2:
        raise EnsembleError("variance needs at least two samples")
    x = ens.stack()
    dev = x - x.mean(axis=0)
    var = np.sum(dev * dev, axis=0) / (x.shape[0] - 1)
    return EchogenicityMap(ens.grid, variance_to_echogenicity(var, params.beta))


class RunningMoments:
    """Streaming per-pixel mean and unbiased variance (Chan et al. pairwise merge).

    Lets very large ensembles be reduced without holding every sample.
    """

    def __init__(self, size: int):
        self.count = 0
        self.mean = np.zeros(size)
        self.m2 = np.zeros(size)

    def update(self, batch: np.ndarray) -> None:
        batch = np.atleast_2d(np.asarray(batch, dtype=float))
        nb = batch.shape[0]
        if nb == 0:
            return
        mb = batch.mean(axis=0)
        m2b = np.sum((batch - mb) ** 2, axis=0)
        n = self.count + nb
        delta = mb - self.mean
        self.mean = self.mean + delta * (nb / n)
        self.m2 = self.m2 + m2b + delta**2 * (self.count * nb / n)
        self.count = n

    @property
    def variance(self) -> np.ndarray:
        if self.count < 2:
            raise EnsembleError("variance needs at least two samples")
        return self.m2 / (self.count - 1)


def empirical_sample(
    p: EchogenicityMap,
    m_seed: int,
    params: VarianceModelParams = VarianceModelParams(),
    c_seed: int = 0,
) -> ReflectivityMap:
    """One draw ``m * p + p**beta * G`` with ``m`` from ``m_seed`` and ``G`` from ``c_seed``."""
    m = speckle(p.grid, m_seed)
    g = np.random.default_rng(np.random.SeedSequence([int(m_seed), int(c_seed), 1])).standard_normal(p.grid.num_pixels)
    return ReflectivityMap(p.grid, m * p.values + np.power(p.values, params.beta) * g)


def empirical_batch(p: EchogenicityMap, m_seed: int, params: VarianceModelParams, rng, count: int) -> np.ndarray:
    """``count`` oracle samples as a ``(count, N)`` array sharing one speckle field."""
    mp = speckle(p.grid, m_seed) * p.values
    spread = np.power(p.values, params.beta)
    return mp + spread * rng.standard_normal((count, p.grid.num_pixels))


def empirical_ensemble(
    p: EchogenicityMap, m_seed: int, c_seeds: Iterable[int], params: VarianceModelParams = VarianceModelParams()
) -> SampleEnsemble:
    return SampleEnsemble(tuple(empirical_sample(p, m_seed, params, c) for c in c_seeds))


def db_compress(img, dynamic_range_db: float = 60.0) -> np.ndarray:
    """``20 log10(|v| / max|v|)`` clipped to ``[-dynamic_range_db, 0]``."""
    if not dynamic_range_db > 0:
        raise ValueError("dynamic_range_db must be positive")
    values = img.values if hasattr(img, "values") else np.asarray(img, dtype=float)
    a = np.abs(np.asarray(values, dtype=float))
    peak = a.max() if a.size else 0.0
    if peak == 0:
        return np.full(a.shape, -float(dynamic_range_db))
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(a / peak)
    return np.clip(db, -dynamic_range_db, 0.0)


def ensemble_from_arrays(grid: ImageGrid, arrays: Sequence[np.ndarray]) -> SampleEnsemble:
    return SampleEnsemble(tuple(ReflectivityMap(grid, a) for a in arrays))
