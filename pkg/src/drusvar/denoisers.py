"""Denoisers usable as the sampler prior.

A denoiser maps ``(noisy_image, sigma) -> clean estimate`` on flat image
vectors, with ``noisy = clean + sigma * eps``. Trained networks can be wrapped
the same way; none ship with the package.
"""

from __future__ import annotations

import math

import numpy as np


class UnsupportedSizeError(ValueError):
    pass


def identity_denoiser(x: np.ndarray, sigma: float) -> np.ndarray:
    return np.array(x, dtype=float)


def gaussian_prior_denoiser(prior_variance: float):
    """MMSE denoiser for an i.i.d. zero-mean Gaussian prior: ``x * v / (v + sigma^2)``."""
    if not prior_variance > 0:
        raise ValueError("prior_variance must be positive")
    v = float(prior_variance)

    def denoise(x: np.ndarray, sigma: float) -> np.ndarray:
        if math.isinf(v):
            return np.array(x, dtype=float)
        return np.asarray(x, dtype=float) * (v / (v + sigma * sigma))

    return denoise


def _square_side(n: int) -> int:
    side = math.isqrt(n)
    if side * side != n or side < 1 or side & (side - 1):
        raise UnsupportedSizeError(f"shrinkage denoiser needs a square power-of-two image, got {n} pixels")
    return side


def haar2(img: np.ndarray) -> np.ndarray:
    """Full-depth orthonormal 2-D Haar transform of a square dyadic image (Mallat layout)."""
    out = np.array(img, dtype=float)
    n = out.shape[0]
    while n > 1:
        blk = out[:n, :n]
        a = (blk[0::2] + blk[1::2]) / math.sqrt(2.0)
        d = (blk[0::2] - blk[1::2]) / math.sqrt(2.0)
        blk = np.vstack([a, d])
        a = (blk[:, 0::2] + blk[:, 1::2]) / math.sqrt(2.0)
        d = (blk[:, 0::2] - blk[:, 1::2]) / math.sqrt(2.0)
        out[:n, :n] = np.hstack([a, d])
        n //= 2
    return out


def ihaar2(coef: np.ndarray) -> np.ndarray:
    out = np.array(coef, dtype=float)
    size = out.shape[0]
    n = 2
    while n <= size:
        h = n // 2
        blk = out[:n, :n]
        a, d = blk[:, :h], blk[:, h:]
        cols = np.empty_like(blk)
        cols[:, 0::2] = (a + d) / math.sqrt(2.0)
        cols[:, 1::2] = (a - d) / math.sqrt(2.0)
        a, d = cols[:h], cols[h:]
        rows = np.empty_like(cols)
        rows[0::2] = (a + d) / math.sqrt(2.0)
        rows[1::2] = (a - d) / math.sqrt(2.0)
        out[:n, :n] = rows
        n *= 2
    return out


def patchwise_shrinkage_denoiser(threshold_scale: float = 2.0):
    """Soft-threshold Haar detail coefficients at ``threshold_scale * sigma``.

    The single coarse (DC) coefficient is never thresholded, so constant
    images pass unchanged.
    """
    if not threshold_scale > 0:
        raise ValueError("threshold_scale must be positive")

    def denoise(x: np.ndarray, sigma: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        side = _square_side(x.size)
        if sigma <= 0:
            return x.copy()
        c = haar2(x.reshape(side, side))
        dc = c[0, 0]
        t = threshold_scale * sigma
        c = np.sign(c) * np.maximum(np.abs(c) - t, 0.0)
        c[0, 0] = dc
        return ihaar2(c).reshape(-1)

    return denoise
