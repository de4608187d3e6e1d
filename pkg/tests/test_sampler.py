import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drusvar.acoustic import SeparableOperator, build_separable_psf
from drusvar.denoisers import identity_denoiser, patchwise_shrinkage_denoiser
from drusvar.grid import ImageGrid, ReflectivityMap
from drusvar.sampler import (
    MEASUREMENT,
    PREDICTION,
    UNOBSERVED,
    ConstraintViolation,
    DenoiserContractError,
    SamplerConfig,
    SamplerPlan,
    compute_coefficients,
    constraint_residuals,
    default_sigma_max,
    make_schedule,
    sample,
    sample_vector,
    schedule_for,
)
from drusvar.spectral import svd_separable, to_spectral


def identity_factorization(n=8):
    grid = ImageGrid(n, n, 0.0, 1.0, 0.0, 1.0)
    return grid, svd_separable(SeparableOperator([1.0], [1.0], grid))


def test_schedule_without_skips():
    s = make_schedule(20, 5.0, 0.01, 20)
    np.testing.assert_array_equal(s.step_indices, np.arange(20, -1, -1))
    assert s.num_timesteps == 20 and s.num_steps == 20


def test_schedule_geometric_ratio():
    s = make_schedule(1000, 10.0, 1e-3, 50)
    ladder = s.sigmas[1:]
    ratios = ladder[1:] / ladder[:-1]
    expected = (10.0 / 1e-3) ** (1 / 999)
    assert np.max(np.abs(ratios - expected)) < 1e-12
    assert s.sigmas[0] == 0.0
    assert s.step_indices[0] == 1000 and s.step_indices[-1] == 0
    assert s.num_steps == 50
    assert np.all(np.diff(s.traversal) < 0)


@pytest.mark.parametrize("args", [(10, 1.0, 0.1, 11), (10, 1.0, 0.1, 0), (10, 0.1, 1.0, 5), (10, 1.0, 0.0, 5)])
def test_schedule_errors(args):
    with pytest.raises(ValueError):
        make_schedule(*args)


def test_noiseless_measurement_branch():
    c = compute_coefficients(2.0, 0.5, 0.0, [1.3], eta=0.85, eta_b=1.0)
    assert (c.A[0], c.B[0], c.C[0], c.D[0]) == (0.0, 1.0, 0.0, 0.5)
    assert c.branch[0] == MEASUREMENT


def test_unobserved_branch():
    c = compute_coefficients(2.0, 0.5, 0.3, [0.0], eta=0.6)
    assert c.B[0] == 0.0 and c.branch[0] == UNOBSERVED
    assert (c.A[0] * 2.0) ** 2 + c.D[0] ** 2 == pytest.approx(0.25, abs=1e-15)


def test_prediction_branch_attenuation():
    sigma_t, sigma_n, sigma_d, s = 1.0, 0.1, 0.5, 2.0
    c = compute_coefficients(sigma_t, sigma_n, sigma_d, [s], eta=0.85, eta_b=1.0)
    assert c.branch[0] == PREDICTION
    assert c.B[0] == pytest.approx((sigma_n * s / sigma_d) ** 2)


@settings(max_examples=300, deadline=None)
@given(
    st.floats(1e-3, 1e3),
    st.floats(0.0, 0.999),
    st.one_of(st.just(0.0), st.floats(1e-4, 10.0)),
    st.one_of(st.just(0.0), st.floats(1e-4, 10.0)),
    st.floats(0.0, 1.0),
    st.floats(0.0, 1.0),
)
def test_identities_hold(sigma_t, frac, sigma_d, s, eta, eta_b):
    sigma_n = sigma_t * frac
    c = compute_coefficients(sigma_t, sigma_n, sigma_d, [s], eta, eta_b)
    noise, signal = constraint_residuals(c, sigma_t, sigma_n, sigma_d, [s])
    assert abs(noise[0]) <= 1e-12 * max(1.0, sigma_n**2)
    assert abs(signal[0]) <= 1e-12
    assert c.D[0] >= 0
    if s == 0:
        assert c.B[0] == 0


def test_coefficient_input_errors():
    with pytest.raises(ValueError):
        compute_coefficients(1.0, 1.0, 0.1, [1.0])
    with pytest.raises(ValueError):
        compute_coefficients(1.0, 0.5, 0.1, [-1.0])


def test_constraint_violation_is_assertion():
    assert issubclass(ConstraintViolation, AssertionError)


def test_identity_fixed_point(rng):
    grid, f = identity_factorization()
    y = rng.standard_normal(grid.num_pixels)
    yb = to_spectral(f, y)
    cfg = SamplerConfig(measurement_noise_std=0.0, eta_b=1.0, num_steps=10)
    out = sample(yb, f, identity_denoiser, schedule_for(yb, cfg), cfg)
    assert isinstance(out, ReflectivityMap)
    np.testing.assert_array_equal(out.values, y)


def test_seed_determinism(rng):
    grid = ImageGrid(16, 16, 0.0, 3.0, 0.0, 3.0)
    f = svd_separable(build_separable_psf(grid))
    yb = to_spectral(f, rng.standard_normal(grid.num_pixels))
    cfg = SamplerConfig(measurement_noise_std=0.1, num_steps=12)
    plan = SamplerPlan(f, schedule_for(yb, cfg), cfg)
    den = patchwise_shrinkage_denoiser()
    a = sample_vector(yb, f, den, plan, seed=1)
    b = sample_vector(yb, f, den, plan, seed=1)
    c = sample_vector(yb, f, den, plan, seed=2)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_measurement_consistency(rng):
    grid = ImageGrid(16, 16, 0.0, 3.0, 0.0, 3.0)
    f = svd_separable(build_separable_psf(grid))
    yb = to_spectral(f, rng.standard_normal(grid.num_pixels))
    cfg = SamplerConfig(measurement_noise_std=0.0, eta_b=1.0, num_steps=20)
    out = sample(yb, f, patchwise_shrinkage_denoiser(), schedule_for(yb, cfg), cfg)
    xb = f.Vt(out.values)
    obs = yb.observed
    np.testing.assert_allclose(xb[obs], yb.coefficients[obs], atol=1e-10 * np.abs(yb.coefficients).max())


def test_denoiser_contract(rng):
    grid, f = identity_factorization()
    yb = to_spectral(f, rng.standard_normal(grid.num_pixels))
    cfg = SamplerConfig(num_steps=3)
    with pytest.raises(DenoiserContractError):
        sample(yb, f, lambda x, s: x[:-1], schedule_for(yb, cfg), cfg)


def test_plan_trace_rows(rng):
    grid = ImageGrid(16, 16, 0.0, 3.0, 0.0, 3.0)
    f = svd_separable(build_separable_psf(grid))
    yb = to_spectral(f, rng.standard_normal(grid.num_pixels))
    cfg = SamplerConfig(measurement_noise_std=0.05, num_steps=8)
    rows = SamplerPlan(f, schedule_for(yb, cfg), cfg).trace_rows()
    assert len(rows) == 8
    assert rows[-1]["sigma_next"] == 0.0
    for r in rows:
        assert r["n_measurement"] + r["n_prediction"] + r["n_unobserved"] == grid.num_pixels
        assert r["noise_residual"] <= 1e-12 * max(1.0, r["sigma_next"] ** 2)
        assert r["signal_residual"] <= 1e-12


def test_sigma_max_default(rng):
    grid, f = identity_factorization()
    y = rng.standard_normal(grid.num_pixels)
    yb = to_spectral(f, y)
    assert default_sigma_max(yb) == pytest.approx(2 * np.abs(y).max())
    cfg = SamplerConfig()
    assert schedule_for(yb, cfg).traversal[0] == pytest.approx(2 * np.abs(y).max())
    zero = to_spectral(f, np.zeros(grid.num_pixels))
    assert schedule_for(zero, cfg).traversal[0] > cfg.sigma_min


@pytest.mark.parametrize("kw", [{"eta": 1.5}, {"eta_b": -0.1}, {"num_steps": 0}, {"measurement_noise_std": -1}])
def test_config_ranges(kw):
    with pytest.raises(ValueError):
        SamplerConfig(**kw)


def test_sample_needs_grid(rng):
    from drusvar.spectral import svd_dense

    f = svd_dense(np.eye(4))
    yb = to_spectral(f, rng.standard_normal(4))
    cfg = SamplerConfig(num_steps=2)
    with pytest.raises(ValueError):
        sample(yb, f, identity_denoiser, schedule_for(yb, cfg), cfg)
    out = sample(yb, f, identity_denoiser, schedule_for(yb, cfg), cfg, grid=ImageGrid(2, 2, 0, 1, 0, 1))
    assert out.values.size == 4
    assert math.isfinite(out.values.sum())
