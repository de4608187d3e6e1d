import pytest

from drusvar.config import ConfigError, ExperimentConfig, load_config, parse_config


def test_defaults():
    cfg = ExperimentConfig()
    assert cfg.grid.shape == (128, 128)
    assert (cfg.samples, cfg.steps, cfg.beta) == (10, 50, 0.5)
    assert cfg.seeds == tuple(range(9))
    assert cfg.lattice_size == 3
    assert ExperimentConfig(phantom="scatterer").lattice_size == 5


def test_load_example(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text(
        """
[grid]
size = 64
[phantom]
kind = "scatterer"
seeds = [1, 2]
[sampler]
eta = 0.5
[experiment]
noise_std = [0.018, 0.1]
output_dir = "out"
"""
    )
    cfg = load_config(path)
    assert cfg.grid.width_px == 64 and cfg.phantom == "scatterer"
    assert cfg.seeds == (1, 2) and cfg.eta == 0.5
    assert cfg.noise_std == (0.018, 0.1)


@pytest.mark.parametrize(
    "doc",
    [
        {"bogus": {}},
        {"sampler": {"etta": 1.0}},
        {"experiment": {"noise_std": []}},
        {"experiment": {"noise_std": [-0.1]}},
        {"phantom": {"kind": "cyst"}},
        {"operator": {"kind": "fft"}},
        {"sampler": {"samples": 1}},
        {"sampler": {"steps": "many"}},
    ],
)
def test_invalid(doc):
    with pytest.raises(ConfigError):
        parse_config(doc)


def test_malformed_toml(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("[grid\nsize=")
    with pytest.raises(ConfigError):
        load_config(p)


def test_shipped_configs_parse():
    from pathlib import Path

    root = Path(__file__).resolve().parents[1] / "configs"
    files = sorted(root.glob("*.toml"))
    assert files
    for f in files:
        load_config(f)
