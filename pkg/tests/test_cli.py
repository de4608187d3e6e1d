import subprocess
import sys

import numpy as np
import pytest

from drusvar import container
from drusvar.cli import main
from drusvar.grid import ImageGrid


def test_help_exits_zero(capsys):
    assert main(["phantom", "--help"]) == 0
    assert "--kind" in capsys.readouterr().out


def test_unknown_subcommand(capsys):
    assert main(["frobnicate"]) == 2
    assert capsys.readouterr().err


def test_missing_input_is_io_error(tmp_path, capsys):
    assert main(["render", "--in", str(tmp_path / "nope.usir"), "--out", str(tmp_path / "x.png")]) == 3
    err = capsys.readouterr()
    assert err.out == "" and "nope.usir" in err.err


def test_corrupt_input_is_io_error(tmp_path):
    p = tmp_path / "bad.usir"
    p.write_bytes(b"USIR\x01\x00\x01\x00garbage")
    assert main(["render", "--in", str(p), "--out", str(tmp_path / "x.png")]) == 3


def test_bad_config_is_validation_error(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[experiment]\nnoise_std = []\n")
    assert main(["phantom", "--config", str(cfg), "--out", str(tmp_path / "p.usir")]) == 4


@pytest.mark.filterwarnings("ignore:PSF width")
def test_pipeline(tmp_path, capsys):
    g = ["--grid-size", "32"]
    ph, sp, ms = (str(tmp_path / n) for n in ("p.usir", "o.usir", "y.usir"))
    assert main(["phantom", *g, "--out", ph]) == 0
    assert main(["speckle", *g, "--in", ph, "--seed", "3", "--out", sp]) == 0
    assert main(["simulate", *g, "--in", sp, "--noise-std", "0.05", "--out", ms]) == 0
    out_dir = tmp_path / "rec"
    assert main(["reconstruct", *g, "--in", ms, "--noise-std", "0.05", "--samples", "3", "--steps", "4",
                 "--out-dir", str(out_dir)]) == 0
    grid = ImageGrid.picmus(32)
    var = container.read_map(out_dir / "drus_var.usir", grid)
    assert np.all(var.values >= 0)
    assert container.read_ensemble(out_dir / "ensemble.usir", grid).shape == (3, 1024)
    capsys.readouterr()
    assert main(["metrics", *g, "--in", str(out_dir / "drus_var.usir"), "--name", "DRUSvar",
                 "--json", str(tmp_path / "m.json")]) == 0
    table = capsys.readouterr().out.splitlines()
    assert table[0] == "estimator,metric,region,value"
    assert len(table) == 1 + 9 * 2
    png = tmp_path / "v.png"
    assert main(["render", "--in", str(out_dir / "drus_var.usir"), "--dynamic-range", "40", "--out", str(png)]) == 0
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_rf_pipeline(tmp_path):
    g = ["--grid-size", "16"]
    cfg = tmp_path / "c.toml"
    cfg.write_text('[grid]\nsize = 16\nx_range_mm = [-2.0, 2.0]\nz_range_mm = [12.0, 16.0]\n'
                   '[phantom]\nlattice = 1\nradius_mm = 1.0\n'
                   '[operator]\nkind = "dense"\nnum_elements = 8\n')
    ph, sp, rf, das = (str(tmp_path / n) for n in ("p.usir", "o.usir", "rf.usir", "das.usir"))
    c = ["--config", str(cfg)]
    assert main(["phantom", *c, *g, "--out", ph]) == 0
    assert main(["speckle", *c, *g, "--in", ph, "--out", sp]) == 0
    assert main(["simulate", *c, *g, "--in", sp, "--out", rf]) == 0
    assert container.read_container(rf).kind == container.Kind.RF
    assert main(["beamform", *c, *g, "--in", rf, "--method", "das", "--out", das]) == 0
    assert main(["beamform", *c, *g, "--in", rf, "--method", "matched", "--out", das]) == 0
    assert main(["reconstruct", *c, *g, "--in", rf, "--samples", "2", "--steps", "3",
                 "--out-dir", str(tmp_path / "r")]) == 0


def test_experiment_subcommand(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[grid]\nsize = 32\n[phantom]\nseeds = [0]\n[sampler]\nsamples = 2\nsteps = 3\n")
    out = tmp_path / "exp"
    assert main(["experiment", "--config", str(cfg), "--noise-std", "0.02", "--out-dir", str(out), "--workers", "1"]) == 0
    assert capsys.readouterr().out.strip() == str(out)
    assert (out / "summary.csv").exists()


@pytest.mark.slow
def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "drusvar.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "reconstruct" in r.stdout
