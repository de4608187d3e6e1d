import numpy as np
from PIL import Image

from drusvar.render import render_png, to_gray


def test_gray_levels():
    v = np.array([1.0, 10 ** (-30 / 20), 1e-4, 0.0])
    np.testing.assert_array_equal(to_gray(v, 60.0), [255, 128, 0, 0])


def test_all_zero_is_black(tmp_path):
    render_png(np.zeros((4, 6)).reshape(-1), 60.0, tmp_path / "z.png", (4, 6))
    im = np.asarray(Image.open(tmp_path / "z.png"))
    assert im.shape == (4, 6) and not im.any()


def test_png_round_trip_and_determinism(tmp_path, rng):
    img = rng.standard_normal((8, 8))
    render_png(img.reshape(-1), 60.0, tmp_path / "a.png", (8, 8))
    render_png(img.reshape(-1), 60.0, tmp_path / "b.png", (8, 8))
    assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()
    im = Image.open(tmp_path / "a.png")
    assert im.mode == "L"
    np.testing.assert_array_equal(np.asarray(im), to_gray(img, 60.0, (8, 8)))
    assert np.asarray(im).max() == 255
