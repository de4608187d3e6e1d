import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from drusvar.grid import (
    EchogenicityMap,
    ImageGrid,
    ReflectivityMap,
    RegionMask,
    RFChannelData,
    annulus_mask,
    disk_mask,
    pixel_position,
)


def test_picmus_extent_and_pitch():
    g = ImageGrid.picmus(256)
    assert g.shape == (256, 256)
    assert g.num_pixels == 65536
    assert g.dx_mm == pytest.approx(36.0 / 255)
    assert g.x_mm[0] == -18.0 and g.x_mm[-1] == pytest.approx(18.0)
    assert g.z_mm[0] == 10.0 and g.z_mm[-1] == pytest.approx(46.0)


def test_pixel_position_corners():
    g = ImageGrid(4, 3, 0.0, 3.0, 1.0, 3.0)
    assert pixel_position(g, 0) == (0.0, 1.0)
    assert pixel_position(g, 3) == (3.0, 1.0)
    assert pixel_position(g, 4) == (0.0, 2.0)
    assert pixel_position(g, 11) == (3.0, 3.0)


@pytest.mark.parametrize("index", [-1, 12, 100])
def test_pixel_position_out_of_range(index):
    g = ImageGrid(4, 3, 0.0, 3.0, 1.0, 3.0)
    with pytest.raises(IndexError):
        pixel_position(g, index)


@given(st.integers(2, 40), st.integers(2, 40), st.data())
def test_nearest_index_inverts_pixel_position(w, d, data):
    g = ImageGrid(w, d, -1.5, 2.5, 5.0, 9.0)
    i = data.draw(st.integers(0, g.num_pixels - 1))
    assert g.nearest_index(*pixel_position(g, i)) == i


def test_meshgrid_matches_storage_order():
    g = ImageGrid(5, 3, 0.0, 4.0, 0.0, 2.0)
    x, z = g.meshgrid()
    for i in range(g.num_pixels):
        assert (x[i], z[i]) == pytest.approx(pixel_position(g, i))


@pytest.mark.parametrize(
    "args",
    [(1, 4, 0, 1, 0, 1), (4, 4, 1, 1, 0, 1), (4, 4, 0, 1, 2, 1)],
)
def test_invalid_grid(args):
    with pytest.raises(ValueError):
        ImageGrid(*args)


def test_maps_validate_and_freeze(small_grid):
    with pytest.raises(ValueError):
        EchogenicityMap(small_grid, -np.ones(small_grid.num_pixels))
    with pytest.raises(ValueError):
        ReflectivityMap(small_grid, np.zeros(5))
    src = np.arange(small_grid.num_pixels, dtype=float)
    m = ReflectivityMap(small_grid, src)
    src[0] = 99.0
    assert m.values[0] == 0.0
    with pytest.raises(ValueError):
        m.values[0] = 1.0
    assert m.image().shape == small_grid.shape


def test_rf_layout_is_element_major():
    v = np.arange(12.0)
    rf = RFChannelData(3, 4, 20e6, v)
    assert rf.traces().shape == (3, 4)
    np.testing.assert_array_equal(rf.traces()[1], [4, 5, 6, 7])
    with pytest.raises(ValueError):
        RFChannelData(3, 5, 20e6, v)
    with pytest.raises(ValueError):
        RFChannelData(3, 4, 0.0, v)


def test_masks(small_grid):
    d = disk_mask(small_grid, 0.0, 12.0, 1.0)
    a = annulus_mask(small_grid, 0.0, 12.0, 1.25, 1.6)
    assert d.count > 0 and a.count > 0
    assert (d & a).count == 0
    assert (d | a).count == d.count + a.count
    x, z = small_grid.meshgrid()
    r = np.hypot(x, z - 12.0)
    np.testing.assert_array_equal(d.member, r <= 1.0)
    with pytest.raises(ValueError):
        RegionMask(small_grid, np.ones(3, dtype=bool))
