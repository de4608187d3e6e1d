"""Spectral diffusion restoration sampler.

Works in the right-singular basis of the degradation operator, where the
inverse problem decouples into per-component denoising problems
``ybar_i = xbar_i + (sigma_d / s_i) * noise``. Noise levels are
sigma-parameterised: a state at level ``sigma`` is ``x_0 + sigma * eps``.

Each skipped step moves component ``i`` from ``sigma_t`` to ``sigma_next``:

    xbar_next = A * xbar_t + B * ybar + C * xbar_pred + D * xi

with the signal constraint ``A + B + C = 1`` and the noise constraint
``(A sigma_t)^2 + (B sigma_d / s_i)^2 + D^2 = sigma_next^2``. Writing
``r = sigma_d / s_i``, the branches are

* unobserved (``s_i = 0``): ``B = 0``, ``A = sqrt(1 - eta^2) sigma_next / sigma_t``,
  ``D = eta sigma_next``;
* measurement-dominant (``r <= sigma_next``): ``A = 0``, ``B = eta_b``,
  ``D = sqrt(sigma_next^2 - (eta_b r)^2)``;
* prediction-dominant (``r > sigma_next``): ``B = eta_b (sigma_next / r)^2``, the
  remaining budget ``R = sqrt(sigma_next^2 - (B r)^2)`` is split as
  ``A = sqrt(1 - eta^2) R / sigma_t`` and ``D = eta R``.

``C`` always absorbs ``1 - A - B``. The quadratic attenuation in the last
branch is inverse-variance weighting of the measurement against a state of
level ``sigma_next``; with ``eta = eta_b = 1`` the chain's mean reproduces the
Gaussian posterior mean as the step count grows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .grid import ImageGrid, ReflectivityMap
from .spectral import SpectralVector, SVDFactorization

Denoiser = Callable[[np.ndarray, float], np.ndarray]

IDENTITY_TOL = 1e-12

UNOBSERVED, MEASUREMENT, PREDICTION = 0, 1, 2


class ConstraintViolation(AssertionError):
    """Raised if step coefficients break the signal or noise identity. Should never fire."""


class DenoiserContractError(ValueError):
    pass


@dataclass(frozen=True)
class DiffusionSchedule:
    """Noise ladder ``sigmas[t]`` for ``t = 0..T`` (``sigmas[0] = 0``) and the visited timesteps."""

    sigmas: np.ndarray
    step_indices: np.ndarray

    def __post_init__(self):
        s = self.sigmas[self.step_indices]
        if self.step_indices[0] != self.num_timesteps or self.step_indices[-1] != 0:
            raise ValueError("step_indices must run from T down to 0")
        if not np.all(np.diff(s) < 0):
            raise ValueError("noise levels must strictly decrease along the traversal")

    @property
    def num_timesteps(self) -> int:
        return self.sigmas.size - 1

    @property
    def num_steps(self) -> int:
        return self.step_indices.size - 1

    @property
    def traversal(self) -> np.ndarray:
        """Noise levels visited, from ``sigma_T`` down to 0."""
        return self.sigmas[self.step_indices]


def make_schedule(T: int, sigma_max: float, sigma_min: float, num_steps: int) -> DiffusionSchedule:
    """Geometric ladder ``sigma_1 = sigma_min .. sigma_T = sigma_max`` visited in ``num_steps`` jumps."""
    if not (T >= num_steps >= 1):
        raise ValueError(f"need T >= num_steps >= 1, got T={T}, num_steps={num_steps}")
    if not (sigma_max > sigma_min > 0):
        raise ValueError(f"need sigma_max > sigma_min > 0, got {sigma_max}, {sigma_min}")
    ladder = np.geomspace(sigma_min, sigma_max, T) if T > 1 else np.array([sigma_max])
    sigmas = np.concatenate([[0.0], ladder])
    idx = np.floor(np.linspace(T, 0, num_steps + 1) + 0.5).astype(np.int64)
    return DiffusionSchedule(sigmas, idx)


@dataclass(frozen=True)
class SamplerConfig:
    eta: float = 0.85
    eta_b: float = 1.0
    num_steps: int = 50
    measurement_noise_std: float = 0.0
    seed: int = 0
    num_timesteps: int = 1000
    sigma_min: float = 1e-3
    sigma_max: Optional[float] = None

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0 or not 0.0 <= self.eta_b <= 1.0:
            raise ValueError("eta and eta_b must lie in [0, 1]")
        if self.num_steps < 1:
            raise ValueError("num_steps must be >= 1")
        if self.measurement_noise_std < 0:
            raise ValueError("measurement_noise_std must be nonnegative")


@dataclass(frozen=True)
class StepCoefficients:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    branch: np.ndarray = field(repr=False)


def constraint_residuals(coef: StepCoefficients, sigma_t: float, sigma_next: float, sigma_d: float, s) -> tuple:
    """Return ``(noise_residual, signal_residual)`` arrays for the two step identities."""
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        meas = np.where(coef.B == 0, 0.0, coef.B * sigma_d / s)
    noise = (coef.A * sigma_t) ** 2 + meas**2 + coef.D**2 - sigma_next**2
    signal = coef.A + coef.B + coef.C - 1.0
    return noise, signal


def compute_coefficients(
    sigma_t: float,
    sigma_next: float,
    sigma_d: float,
    s,
    eta: float = 0.85,
    eta_b: float = 1.0,
    check: bool = True,
) -> StepCoefficients:
    """Per-component step coefficients; ``s`` is an array of singular values (0 = unobserved)."""
    if not sigma_t > sigma_next >= 0:
        raise ValueError(f"need sigma_t > sigma_next >= 0, got {sigma_t}, {sigma_next}")
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(s < 0):
        raise ValueError("singular values must be nonnegative")
    obs = s > 0
    r = np.zeros_like(s)
    r[obs] = sigma_d / s[obs]
    meas = obs & (r <= sigma_next)
    pred = obs & ~meas
    keep = math.sqrt(1.0 - eta * eta)

    A = np.empty_like(s)
    B = np.zeros_like(s)
    D = np.empty_like(s)

    A[~obs] = keep * sigma_next / sigma_t
    D[~obs] = eta * sigma_next

    A[meas] = 0.0
    B[meas] = eta_b
    D[meas] = np.sqrt(np.maximum(sigma_next**2 - (eta_b * r[meas]) ** 2, 0.0))

    rp = r[pred]
    Bp = eta_b * (sigma_next / rp) ** 2
    rem = np.sqrt(np.maximum(sigma_next**2 - (Bp * rp) ** 2, 0.0))
    B[pred] = Bp
    A[pred] = keep * rem / sigma_t
    D[pred] = eta * rem

    C = 1.0 - A - B
    branch = np.where(~obs, UNOBSERVED, np.where(meas, MEASUREMENT, PREDICTION))
    coef = StepCoefficients(A, B, C, D, branch)
    if check:
        noise, signal = constraint_residuals(coef, sigma_t, sigma_next, sigma_d, s)
        scale = max(1.0, sigma_next**2)
        if np.max(np.abs(noise)) > IDENTITY_TOL * scale or np.max(np.abs(signal)) > IDENTITY_TOL:
            raise ConstraintViolation(
                f"step {sigma_t:g}->{sigma_next:g}: noise residual {np.max(np.abs(noise)):.3e}, "
                f"signal residual {np.max(np.abs(signal)):.3e}"
            )
    return coef


def default_sigma_max(ybar: SpectralVector) -> float:
    """Top of the ladder: twice the largest observed spectral measurement magnitude."""
    obs = ybar.coefficients[ybar.observed]
    peak = float(np.max(np.abs(obs))) if obs.size else 0.0
    return 2.0 * peak if peak > 0 else 1.0


def schedule_for(ybar: SpectralVector, cfg: SamplerConfig) -> DiffusionSchedule:
    sigma_max = cfg.sigma_max if cfg.sigma_max is not None else default_sigma_max(ybar)
    sigma_max = max(sigma_max, 2.0 * cfg.sigma_min)
    return make_schedule(cfg.num_timesteps, sigma_max, cfg.sigma_min, cfg.num_steps)


class SamplerPlan:
    """Precomputed, validated coefficients for every step of a schedule.

    Coefficients depend only on the schedule, the singular values and the
    config, so one plan serves every sample of an ensemble.
    """

    def __init__(self, f: SVDFactorization, schedule: DiffusionSchedule, cfg: SamplerConfig):
        self.f = f
        self.schedule = schedule
        self.cfg = cfg
        s = np.where(f.observed, f.singular_values, 0.0)
        self.s = s
        self.steps = []
        levels = schedule.traversal
        for sigma_t, sigma_next in zip(levels[:-1], levels[1:]):
            coef = compute_coefficients(sigma_t, sigma_next, cfg.measurement_noise_std, s, cfg.eta, cfg.eta_b)
            self.steps.append((float(sigma_t), float(sigma_next), coef))

    def trace_rows(self) -> list[dict]:
        rows = []
        for k, (st, sn, coef) in enumerate(self.steps):
            noise, signal = constraint_residuals(coef, st, sn, self.cfg.measurement_noise_std, self.s)
            rows.append(
                {
                    "step": k,
                    "sigma_t": st,
                    "sigma_next": sn,
                    "n_measurement": int(np.sum(coef.branch == MEASUREMENT)),
                    "n_prediction": int(np.sum(coef.branch == PREDICTION)),
                    "n_unobserved": int(np.sum(coef.branch == UNOBSERVED)),
                    "noise_residual": float(np.max(np.abs(noise))),
                    "signal_residual": float(np.max(np.abs(signal))),
                }
            )
        return rows


def _initial_state(ybar: SpectralVector, s: np.ndarray, sigma_d: float, sigma_T: float, rng) -> np.ndarray:
    xi = rng.standard_normal(ybar.coefficients.size)
    r = np.full_like(s, np.inf)
    obs = s > 0
    r[obs] = sigma_d / s[obs]
    seeded = obs & (r < sigma_T)
    x = sigma_T * xi
    x[seeded] = ybar.coefficients[seeded] + np.sqrt(sigma_T**2 - r[seeded] ** 2) * xi[seeded]
    return x


def sample_vector(
    ybar: SpectralVector,
    f: SVDFactorization,
    denoiser: Denoiser,
    plan: SamplerPlan,
    seed: int | None = None,
) -> np.ndarray:
    """One restoration in image space (flat vector)."""
    cfg = plan.cfg
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    n = f.num_components
    if ybar.coefficients.size != n:
        raise ValueError(f"spectral measurement has {ybar.coefficients.size} components, expected {n}")
    yb = ybar.coefficients
    xbar = _initial_state(ybar, plan.s, cfg.measurement_noise_std, plan.schedule.traversal[0], rng)
    for sigma_t, sigma_next, c in plan.steps:
        x_img = f.V(xbar)
        pred = np.asarray(denoiser(x_img, sigma_t), dtype=float)
        if pred.shape != x_img.shape:
            raise DenoiserContractError(f"denoiser returned shape {pred.shape}, expected {x_img.shape}")
        pred_bar = f.Vt(pred)
        xbar = c.A * xbar + c.B * yb + c.C * pred_bar
        if sigma_next > 0:
            xbar = xbar + c.D * rng.standard_normal(n)
    return f.V(xbar)


def sample(
    ybar: SpectralVector,
    f: SVDFactorization,
    denoiser: Denoiser,
    schedule: DiffusionSchedule,
    cfg: SamplerConfig,
    grid: ImageGrid | None = None,
) -> ReflectivityMap:
    """Draw one restored reflectivity map.

    ``grid`` defaults to the factorisation's grid when it carries one.
    """
    grid = grid if grid is not None else getattr(f, "grid", None)
    if grid is None:
        raise ValueError("a grid is required to shape the restored map")
    plan = SamplerPlan(f, schedule, cfg)
    return ReflectivityMap(grid, sample_vector(ybar, f, denoiser, plan))
