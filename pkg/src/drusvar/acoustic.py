"""Linear plane-wave acquisition model.

Builds the dense system matrix ``H`` (RF samples from reflectivity), the
apodized matched-filter beamformer ``B``, the separable point-spread surrogate
used for desk-scale experiments, and a delay-and-sum baseline.

Conventions: positions in mm, times in s, rates in Hz, sound speed in m/s.
Elements sit on ``z = 0`` centred on ``x = 0``; RF rows are element-major
(row ``j*K + k`` is element ``j`` at time sample ``k``).
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .grid import ImageGrid, ReflectivityMap, RFChannelData

log = logging.getLogger(__name__)

# envelope level below which the pulse is truncated to zero
PULSE_TRUNCATION = 1e-4


class OperatorError(ValueError):
    pass


@dataclass(frozen=True)
class ProbeConfig:
    num_elements: int
    element_pitch_mm: float
    center_frequency_hz: float
    sampling_rate_hz: float
    bandwidth_ratio: float
    sound_speed_m_per_s: float
    num_time_samples: int
    acquisition_start_time_s: float = 0.0

    def __post_init__(self):
        if self.num_elements < 1:
            raise ValueError("need at least one element")
        if self.element_pitch_mm <= 0:
            raise ValueError("element pitch must be positive")
        if self.center_frequency_hz <= 0 or self.sampling_rate_hz <= 0 or self.sound_speed_m_per_s <= 0:
            raise ValueError("frequencies and sound speed must be positive")
        if not 0 < self.bandwidth_ratio < 1:
            raise ValueError("bandwidth_ratio must lie in (0, 1)")
        if self.num_time_samples < 1:
            raise ValueError("need at least one time sample")

    @classmethod
    def picmus(cls, num_elements: int = 128, num_time_samples: int = 1024, start_time_s: float = 0.0):
        """L11-4v-like linear array: 0.3 mm pitch, 5.208 MHz, 67 % bandwidth, 20.8 MHz sampling."""
        return cls(num_elements, 0.3, 5.208e6, 20.8e6, 0.67, 1540.0, num_time_samples, start_time_s)

    @property
    def sound_speed_mm_per_s(self) -> float:
        return self.sound_speed_m_per_s * 1e3

    @property
    def element_x_mm(self) -> np.ndarray:
        return (np.arange(self.num_elements) - (self.num_elements - 1) / 2.0) * self.element_pitch_mm

    @property
    def time_axis_s(self) -> np.ndarray:
        return self.acquisition_start_time_s + np.arange(self.num_time_samples) / self.sampling_rate_hz

    def fit_to_grid(self, grid: ImageGrid, margin_samples: int | None = None) -> "ProbeConfig":
        """Return a copy whose time window covers every echo from ``grid`` plus the pulse support."""
        if margin_samples is None:
            margin_samples = build_pulse(self).center_index + 1
        x, z = grid.meshgrid()
        tau = plane_wave_delays(self, x, z)
        fs = self.sampling_rate_hz
        k_first = math.floor(tau.min() * fs) - margin_samples
        k_last = math.ceil(tau.max() * fs) + margin_samples
        return replace(
            self,
            acquisition_start_time_s=max(k_first, 0) / fs,
            num_time_samples=int(k_last - max(k_first, 0) + 1),
        )


def plane_wave_delays(probe: ProbeConfig, x_mm: np.ndarray, z_mm: np.ndarray) -> np.ndarray:
    """Round-trip delays of a 0 degree plane wave, shape ``(L, N)``.

    Transmit reaches depth ``z`` after ``z / c``; the echo returns to element
    ``j`` after ``sqrt((x - x_j)^2 + z^2) / c``.
    """
    x_mm = np.asarray(x_mm, dtype=float)
    z_mm = np.asarray(z_mm, dtype=float)
    xe = probe.element_x_mm[:, None]
    return (z_mm[None, :] + np.sqrt((x_mm[None, :] - xe) ** 2 + z_mm[None, :] ** 2)) / probe.sound_speed_mm_per_s


@dataclass(frozen=True)
class PulseKernel:
    """Two-way pulse ``h``: a Gaussian-enveloped cosine, sampled and analytic.

    ``samples[center_index]`` is the value at ``t = 0``.
    """

    samples: np.ndarray
    sample_period_s: float
    center_index: int
    carrier_hz: float
    envelope_sigma_s: float

    @property
    def support_s(self) -> float:
        return self.envelope_sigma_s * math.sqrt(2.0 * math.log(1.0 / PULSE_TRUNCATION))

    def evaluate(self, t_s) -> np.ndarray:
        """Analytic pulse at arbitrary times, zero where the envelope is below the truncation level."""
        t = np.asarray(t_s, dtype=float)
        env = np.exp(-(t**2) / (2.0 * self.envelope_sigma_s**2))
        out = np.cos(2.0 * np.pi * self.carrier_hz * t) * env
        return np.where(env < PULSE_TRUNCATION, 0.0, out)


def build_pulse(probe: ProbeConfig) -> PulseKernel:
    """Gaussian-modulated cosine whose -6 dB spectral width is ``bandwidth_ratio * f0``."""
    bw = probe.bandwidth_ratio * probe.center_frequency_hz
    # |H(f)| ~ exp(-2 pi^2 s^2 (f - f0)^2) drops to 1/2 at f0 +- bw/2
    sigma_t = math.sqrt(2.0 * math.log(2.0)) / (math.pi * bw)
    ts = 1.0 / probe.sampling_rate_hz
    pulse = PulseKernel(np.zeros(1), ts, 0, probe.center_frequency_hz, sigma_t)
    half = int(math.floor(pulse.support_s / ts))
    t = (np.arange(2 * half + 1) - half) * ts
    samples = pulse.evaluate(t)
    samples = samples / np.max(np.abs(samples))
    samples.setflags(write=False)
    return replace(pulse, samples=samples, center_index=half)


@dataclass(frozen=True)
class DenseOperator:
    entries: np.ndarray
    report: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=np.float64)
        if entries.ndim != 2 or 0 in entries.shape:
            raise OperatorError("dense operator needs a non-empty 2-D matrix")
        if not np.all(np.isfinite(entries)):
            raise OperatorError("operator entries must be finite")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def apply(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape[0] != self.cols:
            raise OperatorError(f"operator expects length {self.cols}, got {v.shape[0]}")
        return self.entries @ v

    def adjoint(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if w.shape[0] != self.rows:
            raise OperatorError(f"adjoint expects length {self.rows}, got {w.shape[0]}")
        return self.entries.T @ w

    def to_dense(self) -> np.ndarray:
        return np.array(self.entries)


@dataclass(frozen=True)
class SystemMatrix(DenseOperator):
    """``H`` together with the acquisition it was built for."""

    probe: ProbeConfig | None = None
    grid: ImageGrid | None = None
    pulse: PulseKernel | None = None


def build_system_matrix(probe: ProbeConfig, grid: ImageGrid, pulse: PulseKernel | None = None) -> SystemMatrix:
    """Dense ``(K*L) x N`` matrix with entry ``((j, k), i) = h(t_k - tau_j(r_i))``.

    Intended for desk-scale grids (up to roughly 128 x 128 with few elements);
    memory is ``8*K*L*N`` bytes.
    """
    if pulse is None:
        pulse = build_pulse(probe)
    x, z = grid.meshgrid()
    tau = plane_wave_delays(probe, x, z)
    t = probe.time_axis_s
    support = pulse.support_s
    if tau.max() - support > t[-1] or tau.min() + support < t[0]:
        raise OperatorError("time window does not overlap the echo delays of the grid")
    if tau.max() + support > t[-1] or tau.min() - support < t[0]:
        warnings.warn("time window truncates part of the echo support; H columns are clipped", stacklevel=2)
    L, K, N = probe.num_elements, probe.num_time_samples, grid.num_pixels
    entries = np.empty((L * K, N))
    for j in range(L):
        entries[j * K : (j + 1) * K] = pulse.evaluate(t[:, None] - tau[j][None, :])
    return SystemMatrix(entries, probe=probe, grid=grid, pulse=pulse)


@dataclass(frozen=True)
class ApodizationConfig:
    tukey_alpha: float = 0.25
    f_number: float = 1.4

    def __post_init__(self):
        if not 0.0 <= self.tukey_alpha <= 1.0:
            raise ValueError("tukey_alpha must lie in [0, 1]")
        if not self.f_number > 0:
            raise ValueError("f_number must be positive")


def tukey(u: np.ndarray, alpha: float) -> np.ndarray:
    """Tukey window on normalised position ``u`` in [-1, 1]; zero outside."""
    a = np.abs(np.asarray(u, dtype=float))
    out = np.zeros_like(a)
    flat = a <= 1.0 - alpha
    out[flat] = 1.0
    if alpha > 0:
        taper = (a > 1.0 - alpha) & (a <= 1.0)
        out[taper] = 0.5 * (1.0 + np.cos(np.pi * (a[taper] - (1.0 - alpha)) / alpha))
    return out


def apodization_weights(probe: ProbeConfig, grid: ImageGrid, apod: ApodizationConfig) -> np.ndarray:
    """Receive weights ``(N, L)``; each nonempty row sums to 1.

    The active aperture for pixel ``(x, z)`` is ``|x_j - x| <= z / (2 f#)``.
    """
    x, z = grid.meshgrid()
    half_width = z / (2.0 * apod.f_number)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = (probe.element_x_mm[None, :] - x[:, None]) / half_width[:, None]
    u = np.where(np.isfinite(u), u, np.inf)
    w = tukey(u, apod.tukey_alpha)
    total = w.sum(axis=1, keepdims=True)
    return np.divide(w, total, out=np.zeros_like(w), where=total > 0)


def build_beamformer(H: DenseOperator, probe: ProbeConfig, grid: ImageGrid, apod: ApodizationConfig) -> DenseOperator:
    """Weighted matched filter ``B = W o H^T`` of shape ``N x (K*L)``.

    Pixels with an empty aperture get an all-zero row, listed in
    ``B.report["empty_rows"]``.
    """
    L, K, N = probe.num_elements, probe.num_time_samples, grid.num_pixels
    if H.shape != (K * L, N):
        raise OperatorError(f"H has shape {H.shape}, expected {(K * L, N)}")
    w = apodization_weights(probe, grid, apod)
    empty = np.flatnonzero(w.sum(axis=1) == 0)
    if empty.size:
        log.warning("%d pixels have an empty receive aperture", empty.size)
    B = (H.entries.T.reshape(N, L, K) * w[:, :, None]).reshape(N, L * K)
    return DenseOperator(B, report={"empty_rows": tuple(int(i) for i in empty)})


def _conv_matrix(kernel: np.ndarray, n: int) -> np.ndarray:
    # 'same'-size convolution with zero padding: y[r] = sum_c k[r - c + h] x[c]
    h = kernel.size // 2
    r = np.arange(n)[:, None]
    c = np.arange(n)[None, :]
    idx = r - c + h
    valid = (idx >= 0) & (idx < kernel.size)
    return np.where(valid, kernel[np.clip(idx, 0, kernel.size - 1)], 0.0)


@dataclass(frozen=True)
class SeparableOperator:
    """2-D ``same`` convolution, axial kernel along depth and lateral kernel along width, zero padded."""

    axial_kernel: np.ndarray
    lateral_kernel: np.ndarray
    grid: ImageGrid

    def __post_init__(self):
        for name in ("axial_kernel", "lateral_kernel"):
            k = np.array(getattr(self, name), dtype=float).reshape(-1)
            if k.size % 2 == 0:
                raise OperatorError(f"{name} must have odd length")
            if not np.all(np.isfinite(k)):
                raise OperatorError(f"{name} has non-finite entries")
            k.setflags(write=False)
            object.__setattr__(self, name, k)

    @property
    def shape(self) -> tuple[int, int]:
        n = self.grid.num_pixels
        return (n, n)

    @property
    def axial_matrix(self) -> np.ndarray:
        return _conv_matrix(self.axial_kernel, self.grid.depth_px)

    @property
    def lateral_matrix(self) -> np.ndarray:
        return _conv_matrix(self.lateral_kernel, self.grid.width_px)

    def _check(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape[0] != self.grid.num_pixels:
            raise OperatorError(f"operator expects length {self.grid.num_pixels}, got {v.shape[0]}")
        return v.reshape(self.grid.shape)

    def apply(self, v: np.ndarray) -> np.ndarray:
        X = self._check(v)
        return (self.axial_matrix @ X @ self.lateral_matrix.T).reshape(-1)

    def adjoint(self, w: np.ndarray) -> np.ndarray:
        X = self._check(w)
        return (self.axial_matrix.T @ X @ self.lateral_matrix).reshape(-1)

    def to_dense(self) -> np.ndarray:
        return np.kron(self.axial_matrix, self.lateral_matrix)


def apply(op, v: np.ndarray) -> np.ndarray:
    return op.apply(v)


def adjoint_apply(op, w: np.ndarray) -> np.ndarray:
    return op.adjoint(w)


def build_separable_psf(
    grid: ImageGrid,
    sigma_mm: float = 0.17,
    carrier_hz: float = 5.208e6,
    sound_speed: float = 1540.0,
) -> SeparableOperator:
    """Gaussian lateral kernel and cosine-modulated Gaussian axial kernel of equal width.

    The axial modulation uses the two-way wavenumber ``2 f0 / c``. Lateral taps
    sum to one, axial taps have unit L2 norm.
    """
    if sigma_mm <= 0:
        raise ValueError("sigma_mm must be positive")
    if sigma_mm < min(grid.dx_mm, grid.dz_mm) / 2:
        warnings.warn("PSF width is below half a pixel; kernels are under-resolved", stacklevel=2)
    reach = sigma_mm * math.sqrt(2.0 * math.log(1.0 / PULSE_TRUNCATION))
    k_per_mm = 2.0 * carrier_hz / (sound_speed * 1e3)

    hl = max(1, math.ceil(reach / grid.dx_mm))
    xl = np.arange(-hl, hl + 1) * grid.dx_mm
    lateral = np.exp(-(xl**2) / (2 * sigma_mm**2))
    lateral /= lateral.sum()

    ha = max(1, math.ceil(reach / grid.dz_mm))
    za = np.arange(-ha, ha + 1) * grid.dz_mm
    axial = np.cos(2 * np.pi * k_per_mm * za) * np.exp(-(za**2) / (2 * sigma_mm**2))
    axial /= np.linalg.norm(axial)
    return SeparableOperator(axial, lateral, grid)


def simulate_rf(H: SystemMatrix, o: ReflectivityMap, noise_std: float = 0.0, seed: int = 0) -> RFChannelData:
    """``y = H o + n`` with ``n`` white Gaussian of standard deviation ``noise_std``."""
    if noise_std < 0:
        raise ValueError("noise_std must be nonnegative")
    if H.probe is None:
        raise OperatorError("simulate_rf needs a system matrix that carries its probe")
    y = H.apply(o.values)
    if noise_std > 0:
        y = y + noise_std * np.random.default_rng(seed).standard_normal(y.size)
    p = H.probe
    return RFChannelData(p.num_elements, p.num_time_samples, p.sampling_rate_hz, y)


def simulate_blurred(op: SeparableOperator, o: ReflectivityMap, noise_std: float = 0.0, seed: int = 0) -> ReflectivityMap:
    """Image-domain measurement ``PSF * o + n`` used in place of ``B y`` with the separable model."""
    if noise_std < 0:
        raise ValueError("noise_std must be nonnegative")
    y = op.apply(o.values)
    if noise_std > 0:
        y = y + noise_std * np.random.default_rng(seed).standard_normal(y.size)
    return ReflectivityMap(o.grid, y)


def beamform_matched(B: DenseOperator, y: RFChannelData, grid: ImageGrid) -> ReflectivityMap:
    return ReflectivityMap(grid, B.apply(y.values))


def das_beamform(
    y: RFChannelData, probe: ProbeConfig, grid: ImageGrid, apod: ApodizationConfig = ApodizationConfig()
) -> ReflectivityMap:
    """Delay-and-sum with linear interpolation in time; out-of-window delays contribute zero."""
    if y.num_elements != probe.num_elements or y.num_time_samples != probe.num_time_samples:
        raise OperatorError("RF dimensions do not match the probe")
    x, z = grid.meshgrid()
    tau = plane_wave_delays(probe, x, z)
    w = apodization_weights(probe, grid, apod)
    traces = y.traces()
    K = probe.num_time_samples
    q = (tau - probe.acquisition_start_time_s) * probe.sampling_rate_hz
    k0 = np.floor(q).astype(np.int64)
    frac = q - k0
    inside = (k0 >= 0) & (k0 <= K - 1)
    k0c = np.clip(k0, 0, K - 1)
    k1c = np.clip(k0 + 1, 0, K - 1)
    out = np.zeros(grid.num_pixels)
    for j in range(probe.num_elements):
        tr = traces[j]
        upper = np.where(k0[j] + 1 <= K - 1, tr[k1c[j]], 0.0)
        val = (1.0 - frac[j]) * tr[k0c[j]] + frac[j] * upper
        out += w[:, j] * np.where(inside[j], val, 0.0)
    return ReflectivityMap(grid, out)
