"""Reconstruction pipeline and the noise-sweep experiment runner.

One experiment cell is a (noise level, speckle seed) pair: synthesise the
reflectivity, simulate the measurement, draw an ensemble of restorations and
score the baseline, the ensemble mean and the variance estimator.
"""

from __future__ import annotations

import csv
import functools
import json
import logging
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import container
from .acoustic import (
    ApodizationConfig,
    ProbeConfig,
    build_beamformer,
    build_separable_psf,
    build_system_matrix,
    simulate_blurred,
    simulate_rf,
)
from .config import ExperimentConfig
from .denoisers import patchwise_shrinkage_denoiser
from .grid import ImageGrid, ReflectivityMap
from .metrics import MetricReport, UnresolvedPeakError, fwhm, gcnr, occlusion_regions, snr
from .phantom import (
    apply_multiplicative_noise,
    default_occlusion_spec,
    default_scatterer_spec,
    make_occlusion_phantom,
    make_scatterer_phantom,
)
from .render import render_png
from .sampler import SamplerConfig, SamplerPlan, sample_vector, schedule_for
from .spectral import SpectralVector, SVDFactorization, svd_dense, svd_separable, to_spectral
from .variance import variance_to_echogenicity

log = logging.getLogger(__name__)

WORKERS_ENV = "DRUSVAR_WORKERS"
ESTIMATORS = ("By", "DRUSmean", "DRUSvar")


def derive_seed(*keys: int) -> int:
    """Independent 32-bit seed for a tuple of integer keys."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw:
        return max(1, int(raw))
    return max(1, os.cpu_count() or 1)


@dataclass(frozen=True)
class Measurement:
    """What the sampler sees: the image-domain baseline and its spectral form."""

    baseline: ReflectivityMap
    ybar: SpectralVector
    sigma_d: float


@dataclass(frozen=True)
class ForwardModel:
    kind: str
    grid: ImageGrid
    factorization: SVDFactorization
    separable: object = None
    system: object = None
    beamformer: object = None
    noise_gain: float = 1.0

    def measure(self, o: ReflectivityMap, noise_std: float, seed: int) -> Measurement:
        if self.kind == "separable":
            y = simulate_blurred(self.separable, o, noise_std, seed)
            return Measurement(y, to_spectral(self.factorization, y.values), noise_std)
        rf = simulate_rf(self.system, o, noise_std, seed)
        by = ReflectivityMap(self.grid, self.beamformer.apply(rf.values))
        # B n is coloured; the sampler models it as white with the mean row energy
        return Measurement(by, to_spectral(self.factorization, by.values), noise_std * self.noise_gain)


def separable_model(grid: ImageGrid, sigma_mm: float = 0.17) -> ForwardModel:
    op = build_separable_psf(grid, sigma_mm)
    return ForwardModel("separable", grid, svd_separable(op), separable=op)


def dense_model(grid: ImageGrid, num_elements: int = 32, apod: ApodizationConfig = ApodizationConfig()) -> ForwardModel:
    """Full ``H`` / ``B`` pair and the SVD of ``B H``; memory grows as ``K L N``."""
    probe = ProbeConfig.picmus(num_elements=num_elements).fit_to_grid(grid)
    H = build_system_matrix(probe, grid)
    B = build_beamformer(H, probe, grid, apod)
    bh = B.entries @ H.entries
    gain = float(np.sqrt(np.mean(np.sum(B.entries**2, axis=1))))
    return ForwardModel("dense", grid, svd_dense(bh), system=H, beamformer=B, noise_gain=gain)


@functools.lru_cache(maxsize=2)
def _model_for(kind: str, grid: ImageGrid, sigma_mm: float, num_elements: int, alpha: float, fnum: float):
    if kind == "separable":
        return separable_model(grid, sigma_mm)
    return dense_model(grid, num_elements, ApodizationConfig(alpha, fnum))


def forward_model(cfg: ExperimentConfig) -> ForwardModel:
    return _model_for(cfg.operator, cfg.grid, cfg.sigma_mm, cfg.num_elements, cfg.tukey_alpha, cfg.f_number)


def reconstruct_ensemble(
    meas: Measurement,
    f: SVDFactorization,
    denoiser,
    num_samples: int = 10,
    num_steps: int = 50,
    eta: float = 0.85,
    eta_b: float = 1.0,
    seed: int = 0,
) -> np.ndarray:
    """``(C, N)`` restorations of one measurement, sample ``c`` seeded by ``(seed, c)``."""
    cfg = SamplerConfig(eta=eta, eta_b=eta_b, num_steps=num_steps, measurement_noise_std=meas.sigma_d, seed=seed)
    plan = SamplerPlan(f, schedule_for(meas.ybar, cfg), cfg)
    return np.stack([sample_vector(meas.ybar, f, denoiser, plan, seed=derive_seed(seed, c)) for c in range(num_samples)])


def estimators(meas: Measurement, stack: np.ndarray, beta: float = 0.5) -> dict[str, np.ndarray]:
    """Linear-amplitude images for the baseline, DRUSmean and DRUSvar."""
    var = np.var(stack, axis=0, ddof=1)
    return {
        "By": meas.baseline.values,
        "DRUSmean": stack.mean(axis=0),
        "DRUSvar": variance_to_echogenicity(var, beta),
    }


def phantom_for(cfg: ExperimentConfig):
    if cfg.phantom == "occlusion":
        spec = default_occlusion_spec(cfg.grid, cfg.lattice_size, cfg.radius_mm)
        return make_occlusion_phantom(cfg.grid, spec), spec
    spec = default_scatterer_spec(cfg.grid, cfg.lattice_size, cfg.amplitude)
    return make_scatterer_phantom(cfg.grid, spec), spec


def occlusion_scores(images: dict, spec, grid: ImageGrid, num_bins=256, erosion=0.10, annulus=(1.25, 1.6)) -> list[dict]:
    rows = []
    for k, d in enumerate(spec.disks):
        reg = occlusion_regions(grid, d.center_x_mm, d.center_z_mm, d.radius_mm, erosion, annulus)
        for name, img in images.items():
            a = np.abs(img)
            rows.append({"estimator": name, "metric": "gCNR", "region": k, "value": gcnr(a, reg.inside, reg.outside, num_bins)})
            rows.append({"estimator": name, "metric": "SNR", "region": k, "value": snr(a, reg.outside)})
    return rows


def scatterer_scores(images: dict, spec, grid: ImageGrid) -> list[dict]:
    rows = []
    for k, pt in enumerate(spec.points):
        for name, img in images.items():
            for axis, label in (("axial", "FWHM_A"), ("lateral", "FWHM_L")):
                try:
                    value = fwhm(img, grid, (pt.x_mm, pt.z_mm), axis)
                except UnresolvedPeakError:
                    value = float("inf")
                rows.append({"estimator": name, "metric": label, "region": k, "value": value})
    return rows


def run_cell(cfg: ExperimentConfig, noise_index: int, seed: int) -> dict:
    """Run one (noise level, speckle seed) cell; failures are captured, not raised."""
    noise = cfg.noise_std[noise_index]
    tag = f"noise{noise:g}_seed{seed}"
    try:
        model = forward_model(cfg)
        p, spec = phantom_for(cfg)
        o = apply_multiplicative_noise(p, seed)
        meas = model.measure(o, noise, derive_seed(seed, noise_index, 1))
        denoiser = patchwise_shrinkage_denoiser(cfg.threshold_scale)
        stack = reconstruct_ensemble(
            meas, model.factorization, denoiser, cfg.samples, cfg.steps, cfg.eta, cfg.eta_b,
            seed=derive_seed(seed, noise_index, 2),
        )
        images = estimators(meas, stack, cfg.beta)
        if cfg.phantom == "occlusion":
            rows = occlusion_scores(images, spec, cfg.grid, cfg.num_bins, cfg.erosion, cfg.annulus)
        else:
            rows = scatterer_scores(images, spec, cfg.grid)
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        container.write_ensemble(out / f"{tag}_ensemble.usir", stack, cfg.grid)
        for name, img in images.items():
            container.write_container(out / f"{tag}_{name}.usir", container.Kind.IMAGE, img.reshape(cfg.grid.shape))
            if cfg.write_images:
                render_png(img, cfg.dynamic_range_db, out / f"{tag}_{name}.png", cfg.grid.shape)
        for r in rows:
            r.update(noise_std=noise, seed=seed)
        return {"noise_std": noise, "seed": seed, "rows": rows, "error": None}
    except Exception as exc:  # a failing cell must not abort the sweep
        log.error("cell %s failed: %s", tag, exc)
        return {"noise_std": noise, "seed": seed, "rows": [], "error": "".join(traceback.format_exception_only(type(exc), exc)).strip()}


def summarize(rows: list[dict]) -> list[dict]:
    groups: dict[tuple, MetricReport] = {}
    for r in rows:
        key = (r["noise_std"], r["estimator"], r["metric"])
        groups.setdefault(key, MetricReport(r["metric"])).add(r["value"])
    out = []
    for (noise, est, metric), rep in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][2], ESTIMATORS.index(kv[0][1]))):
        out.append(
            {"noise_std": noise, "estimator": est, "metric": metric, "mean": rep.mean, "std": rep.std,
             "count": len(rep.values), "finite": int(rep.finite.size)}
        )
    return out


def _write_csv(path: Path, rows: list[dict], fields: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: r[k] for k in fields})


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> Path:
    """Sweep every noise level and speckle seed; returns the report directory.

    Writes ``metrics.csv`` (one row per region), ``summary.csv`` (mean and
    std across regions and seeds) and ``report.json`` (config, failed cells).
    """
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    cells = [(i, s) for i in range(len(cfg.noise_std)) for s in cfg.seeds]
    workers = worker_count() if workers is None else workers
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(cells))) as pool:
            results = list(pool.map(run_cell, [cfg] * len(cells), *zip(*cells)))
    else:
        results = [run_cell(cfg, i, s) for i, s in cells]
    rows = [r for res in results for r in res["rows"]]
    _write_csv(out / "metrics.csv", rows, ["noise_std", "seed", "estimator", "metric", "region", "value"])
    summary = summarize(rows)
    _write_csv(out / "summary.csv", summary, ["noise_std", "estimator", "metric", "mean", "std", "count", "finite"])
    cfg_dict = asdict(cfg)
    cfg_dict["grid"] = asdict(cfg.grid)
    report = {
        "config": cfg_dict,
        "cells": [{"noise_std": r["noise_std"], "seed": r["seed"], "error": r["error"]} for r in results],
        "summary": summary,
    }
    with open(out / "report.json", "w") as fh:
        json.dump(report, fh, indent=2, default=float)
    return out
