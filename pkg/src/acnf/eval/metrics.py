"""PSNR and SSIM in the 8-bit domain."""

from __future__ import annotations

import math

import numpy as np
from scipy.ndimage import correlate1d

from ..codec import as_hwc, quantize_8bit

PSNR_CAP = 100.0
MAX_VALUE = 255.0
BT601 = np.array([0.299, 0.587, 0.114])


def _prepare(a, b, channels: str) -> tuple[np.ndarray, np.ndarray]:
    a, b = as_hwc(a), as_hwc(b)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    a = quantize_8bit(a).astype(np.float64)
    b = quantize_8bit(b).astype(np.float64)
    if channels == "luma" and a.shape[2] == 3:
        a, b = (a @ BT601)[:, :, None], (b @ BT601)[:, :, None]
    elif channels not in ("luma", "rgb"):
        raise ValueError(f"channels must be 'luma' or 'rgb', got {channels!r}")
    return a, b


def mse(a, b, channels: str = "luma") -> float:
    a, b = _prepare(a, b, channels)
    return float(np.mean((a - b) ** 2))


def psnr(a, b, channels: str = "luma") -> float:
    """PSNR in dB of two [0, 1] images after 8-bit quantization (MAX = 255).

    Identical images report ``PSNR_CAP`` instead of infinity. Colour images are
    compared on luma by default; ``channels="rgb"`` averages the MSE over RGB.
    """
    err = mse(a, b, channels)
    if err == 0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(MAX_VALUE**2 / err))


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2
    g = np.exp(-(x**2) / (2 * sigma**2))
    return g / g.sum()


def _filter_valid(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    out = correlate1d(img, g, axis=0, mode="constant")
    out = correlate1d(out, g, axis=1, mode="constant")
    r = len(g) // 2
    return out[r : img.shape[0] - r, r : img.shape[1] - r]


def ssim_map(a: np.ndarray, b: np.ndarray, size: int = 11, sigma: float = 1.5, k1=0.01, k2=0.03, L=MAX_VALUE):
    """Local SSIM of two single-channel arrays over fully-contained windows."""
    if min(a.shape) < size:
        raise ValueError(f"image {a.shape} is smaller than the {size}x{size} SSIM window")
    g = gaussian_window(size, sigma)
    c1, c2 = (k1 * L) ** 2, (k2 * L) ** 2
    mu_a, mu_b = _filter_valid(a, g), _filter_valid(b, g)
    saa = _filter_valid(a * a, g) - mu_a**2
    sbb = _filter_valid(b * b, g) - mu_b**2
    sab = _filter_valid(a * b, g) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * sab + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (saa + sbb + c2)
    return num / den


def ssim(a, b, channels: str = "luma") -> float:
    """Mean SSIM (11x11 Gaussian window, sigma 1.5, K1 0.01, K2 0.03, L 255)."""
    a, b = _prepare(a, b, channels)
    return float(np.mean([ssim_map(a[:, :, c], b[:, :, c]).mean() for c in range(a.shape[2])]))
