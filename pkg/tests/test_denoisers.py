import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drusvar.denoisers import (
    UnsupportedSizeError,
    gaussian_prior_denoiser,
    haar2,
    identity_denoiser,
    ihaar2,
    patchwise_shrinkage_denoiser,
)


def test_haar_round_trip_64(rng):
    x = rng.standard_normal((64, 64))
    np.testing.assert_allclose(ihaar2(haar2(x)), x, atol=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.sampled_from([1, 2, 4, 8, 16, 32]), st.integers(0, 1000))
def test_haar_is_orthonormal(n, seed):
    x = np.random.default_rng(seed).standard_normal((n, n))
    c = haar2(x)
    assert np.linalg.norm(c) == pytest.approx(np.linalg.norm(x), rel=1e-12)
    np.testing.assert_allclose(ihaar2(c), x, atol=1e-10)


def test_haar_dc_is_scaled_mean(rng):
    x = rng.standard_normal((16, 16))
    assert haar2(x)[0, 0] == pytest.approx(x.mean() * 16, rel=1e-12)


def test_shrinkage_sigma_zero_and_constant(rng):
    d = patchwise_shrinkage_denoiser(2.0)
    x = rng.standard_normal(256)
    np.testing.assert_allclose(d(x, 0.0), x, atol=1e-10)
    const = np.full(256, 3.7)
    for sigma in (0.1, 1.0, 100.0):
        np.testing.assert_allclose(d(const, sigma), const, atol=1e-10)


def test_shrinkage_reduces_noise(rng):
    d = patchwise_shrinkage_denoiser(2.0)
    clean = np.zeros((32, 32))
    clean[8:24, 8:24] = 1.0
    noisy = clean + 0.2 * rng.standard_normal(clean.shape)
    out = d(noisy.reshape(-1), 0.2).reshape(32, 32)
    assert np.linalg.norm(out - clean) < 0.6 * np.linalg.norm(noisy - clean)


@pytest.mark.parametrize("n", [15, 24, 12 * 12])
def test_shrinkage_size_errors(n):
    with pytest.raises(UnsupportedSizeError):
        patchwise_shrinkage_denoiser()(np.zeros(n), 1.0)


def test_gaussian_prior_denoiser(rng):
    x = rng.standard_normal(10)
    np.testing.assert_array_equal(gaussian_prior_denoiser(1.0)(x, 0.0), x)
    np.testing.assert_allclose(gaussian_prior_denoiser(1.0)(x, 1.0), x / 2)
    np.testing.assert_allclose(gaussian_prior_denoiser(1e300)(x, 5.0), x)
    np.testing.assert_array_equal(gaussian_prior_denoiser(np.inf)(x, 5.0), x)
    # posterior mean of N(0, v) observed with noise s^2
    v, s = 2.5, 0.7
    assert gaussian_prior_denoiser(v)(np.array([1.0]), s)[0] == pytest.approx(v / (v + s * s))
    with pytest.raises(ValueError):
        gaussian_prior_denoiser(0.0)
    np.testing.assert_array_equal(identity_denoiser(x, 3.0), x)
