"""Command-line entry point: ``drusvar <subcommand> [options]``.

Results go to stdout, diagnostics to stderr. Exit codes: 0 success, 2 usage
error, 3 I/O or container error, 4 validation error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import container
from .acoustic import (
    ApodizationConfig,
    ProbeConfig,
    build_beamformer,
    build_system_matrix,
    das_beamform,
    simulate_rf,
)
from .config import ConfigError, ExperimentConfig, load_config
from .denoisers import patchwise_shrinkage_denoiser
from .experiment import (
    Measurement,
    estimators,
    forward_model,
    occlusion_scores,
    phantom_for,
    reconstruct_ensemble,
    run_experiment,
    scatterer_scores,
)
from .grid import EchogenicityMap, ImageGrid, ReflectivityMap
from .phantom import apply_multiplicative_noise
from .render import render_png
from .spectral import to_spectral

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_VALIDATION = 0, 2, 3, 4

log = logging.getLogger("drusvar")


def _base_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()
    over = {}
    if getattr(args, "grid_size", None):
        g = cfg.grid
        over["grid"] = ImageGrid(args.grid_size, args.grid_size, g.x_min_mm, g.x_max_mm, g.z_min_mm, g.z_max_mm)
    for attr in ("samples", "steps", "eta", "eta_b", "beta", "threshold_scale", "dynamic_range_db"):
        v = getattr(args, attr, None)
        if v is not None:
            over[attr] = v
    if getattr(args, "operator", None):
        over["operator"] = args.operator
    if getattr(args, "kind", None) in ("occlusion", "scatterer"):
        over["phantom"] = args.kind
    if getattr(args, "noise_std", None) is not None:
        over["noise_std"] = tuple(args.noise_std) if isinstance(args.noise_std, list) else (args.noise_std,)
    if getattr(args, "out_dir", None):
        over["output_dir"] = args.out_dir
    return cfg.with_overrides(**over)


def _probe(cfg: ExperimentConfig) -> ProbeConfig:
    return ProbeConfig.picmus(num_elements=cfg.num_elements).fit_to_grid(cfg.grid)


def cmd_phantom(args) -> int:
    cfg = _base_config(args)
    p, _ = phantom_for(cfg)
    container.write_map(args.out, p)
    print(args.out)
    return EXIT_OK


def cmd_speckle(args) -> int:
    cfg = _base_config(args)
    p = container.read_map(args.input, cfg.grid)
    o = apply_multiplicative_noise(EchogenicityMap(cfg.grid, p.values), args.seed)
    container.write_map(args.out, o)
    print(args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _base_config(args)
    o = container.read_map(args.input, cfg.grid)
    model = forward_model(cfg)
    noise = args.noise_std if args.noise_std is not None else 0.0
    if cfg.operator == "separable":
        meas = model.measure(o, noise, args.seed)
        container.write_map(args.out, meas.baseline)
    else:
        container.write_rf(args.out, simulate_rf(model.system, o, noise, args.seed))
    print(args.out)
    return EXIT_OK


def cmd_beamform(args) -> int:
    cfg = _base_config(args)
    probe = _probe(cfg)
    y = container.read_rf(args.input, probe.sampling_rate_hz)
    apod = ApodizationConfig(cfg.tukey_alpha, cfg.f_number)
    if args.method == "das":
        img = das_beamform(y, probe, cfg.grid, apod)
    else:
        H = build_system_matrix(probe, cfg.grid)
        B = build_beamformer(H, probe, cfg.grid, apod)
        img = ReflectivityMap(cfg.grid, B.apply(y.values))
    container.write_map(args.out, img)
    print(args.out)
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    cfg = _base_config(args)
    model = forward_model(cfg)
    noise = args.noise_std if args.noise_std is not None else 0.0
    c = container.read_container(args.input)
    if c.kind == container.Kind.RF:
        if model.kind != "dense":
            raise ConfigError("RF input needs --operator dense")
        by = ReflectivityMap(cfg.grid, model.beamformer.apply(c.data.T.reshape(-1)))
        meas = Measurement(by, to_spectral(model.factorization, by.values), noise * model.noise_gain)
    else:
        y = container.read_map(args.input, cfg.grid)
        meas = Measurement(y, to_spectral(model.factorization, y.values), noise)
    stack = reconstruct_ensemble(
        meas, model.factorization, patchwise_shrinkage_denoiser(cfg.threshold_scale),
        cfg.samples, cfg.steps, cfg.eta, cfg.eta_b, seed=args.seed,
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    images = estimators(meas, stack, cfg.beta)
    container.write_ensemble(out / "ensemble.usir", stack, cfg.grid)
    container.write_container(out / "drus_mean.usir", container.Kind.IMAGE, images["DRUSmean"].reshape(cfg.grid.shape))
    container.write_container(out / "drus_var.usir", container.Kind.IMAGE, images["DRUSvar"].reshape(cfg.grid.shape))
    print(out)
    return EXIT_OK


def cmd_metrics(args) -> int:
    cfg = _base_config(args)
    img = container.read_map(args.input, cfg.grid)
    _, spec = phantom_for(cfg)
    if cfg.phantom == "occlusion":
        rows = occlusion_scores({args.name: img.values}, spec, cfg.grid, cfg.num_bins, cfg.erosion, cfg.annulus)
    else:
        rows = scatterer_scores({args.name: img.values}, spec, cfg.grid)
    w = csv.DictWriter(sys.stdout, fieldnames=["estimator", "metric", "region", "value"], lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    if args.json:
        summary = {}
        for r in rows:
            summary.setdefault(r["metric"], []).append(r["value"])
        with open(args.json, "w") as fh:
            json.dump({k: {"values": v, "mean": float(np.mean(v)), "std": float(np.std(v))} for k, v in summary.items()}, fh, indent=2)
    return EXIT_OK


def cmd_render(args) -> int:
    c = container.read_container(args.input)
    if c.kind not in (container.Kind.IMAGE, container.Kind.MASK):
        raise ConfigError("render needs an image or mask container")
    render_png(c.data.reshape(-1), args.dynamic_range, args.out, c.data.shape)
    print(args.out)
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = _base_config(args)
    out = run_experiment(cfg, workers=args.workers)
    print(out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML experiment config")
    common.add_argument("--grid-size", type=int, help="square grid size in pixels (default 128)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="drusvar", description="Variance-of-diffusion ultrasound reconstruction")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", parents=[common], help="write an echogenicity phantom")
    p.add_argument("--kind", choices=["occlusion", "scatterer"], default="occlusion")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("speckle", parents=[common], help="apply multiplicative speckle")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_speckle)

    p = sub.add_parser("simulate", parents=[common], help="simulate a measurement from a reflectivity map")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--operator", choices=["separable", "dense"])
    p.add_argument("--noise-std", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("beamform", parents=[common], help="DAS or matched-filter beamforming of RF data")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--method", choices=["das", "matched"], default="das")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_beamform)

    p = sub.add_parser("reconstruct", parents=[common], help="draw an ensemble and form DRUSmean / DRUSvar")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--operator", choices=["separable", "dense"])
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--eta", type=float, default=0.85)
    p.add_argument("--eta-b", dest="eta_b", type=float, default=1.0)
    p.add_argument("--threshold-scale", type=float)
    p.add_argument("--noise-std", type=float)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("metrics", parents=[common], help="gCNR / SNR or FWHM report for an image")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--kind", choices=["occlusion", "scatterer"], default="occlusion")
    p.add_argument("--name", default="image")
    p.add_argument("--json", help="also write a key-value summary here")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("render", parents=[common], help="log-compressed 8-bit PNG")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--dynamic-range", type=float, default=60.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("experiment", parents=[common], help="full noise sweep from a config")
    p.add_argument("--noise-std", type=float, nargs="+")
    p.add_argument("--samples", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--eta-b", dest="eta_b", type=float)
    p.add_argument("--kind", choices=["occlusion", "scatterer"])
    p.add_argument("--out-dir")
    p.add_argument("--workers", type=int, help="worker processes (default: $DRUSVAR_WORKERS or CPU count)")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, container.ContainerError) as exc:
        print(f"drusvar: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"drusvar: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
