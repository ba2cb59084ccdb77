"""Bicubic resampling and block rearrangement primitives.

Resizing follows the MATLAB ``imresize`` convention used throughout the
super-resolution literature: Keys cubic kernel with a = -0.5, pixel-centre
alignment, a kernel stretched by ``1/scale`` when shrinking (antialiasing) and
symmetric boundary extension.  The resize is expressed as two dense weight
matrices so that it is exactly linear and differentiable in torch.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
import torch

CUBIC_A = -0.5


def scaled_size(n: int, scale: float) -> int:
    """Output length for an input of length ``n`` (round half up)."""
    return max(1, int(math.floor(n * scale + 0.5)))


def cubic(t: np.ndarray, a: float = CUBIC_A) -> np.ndarray:
    t = np.abs(t)
    t2, t3 = t * t, t * t * t
    return np.where(
        t <= 1,
        (a + 2) * t3 - (a + 3) * t2 + 1,
        np.where(t < 2, a * t3 - 5 * a * t2 + 8 * a * t - 4 * a, 0.0),
    )


def _reflect(idx: np.ndarray, n: int) -> np.ndarray:
    # symmetric extension: ... 1 0 | 0 1 ... n-1 | n-1 n-2 ...
    period = 2 * n
    idx = np.mod(idx, period)
    return np.where(idx < n, idx, period - 1 - idx)


@lru_cache(maxsize=256)
def resize_matrix(n_in: int, n_out: int, scale: float, antialias: bool = True) -> np.ndarray:
    """Dense ``n_out x n_in`` bicubic interpolation matrix (float64, rows sum to 1)."""
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")
    stretch = 1.0 / scale if (antialias and scale < 1) else 1.0
    support = 2.0 * stretch
    out = np.arange(1, n_out + 1, dtype=np.float64)
    centre = out / scale + 0.5 * (1 - 1 / scale)
    left = np.floor(centre - support)
    taps = int(math.ceil(2 * support)) + 2
    idx = left[:, None] + np.arange(taps)[None, :]
    w = cubic((centre[:, None] - idx) / stretch) / stretch
    w = w / w.sum(axis=1, keepdims=True)
    mat = np.zeros((n_out, n_in))
    src = _reflect(idx.astype(np.int64) - 1, n_in)
    for row in range(n_out):
        np.add.at(mat[row], src[row], w[row])
    return mat


def _matrices(h: int, w: int, scale: float, out_size=None):
    oh, ow = out_size if out_size is not None else (scaled_size(h, scale), scaled_size(w, scale))
    return resize_matrix(h, oh, float(scale)), resize_matrix(w, ow, float(scale))


def resize(x, scale: float, out_size=None):
    """Unclamped bicubic resize.

    ``x`` is either a torch tensor shaped (..., H, W) or a numpy image shaped
    H x W or H x W x C.
    """
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")
    if isinstance(x, torch.Tensor):
        h, w = x.shape[-2:]
        mh, mw = _matrices(h, w, scale, out_size)
        mh = torch.as_tensor(mh, dtype=x.dtype, device=x.device)
        mw = torch.as_tensor(mw, dtype=x.dtype, device=x.device)
        return mh @ x @ mw.T
    arr = np.asarray(x, dtype=np.float64)
    h, w = arr.shape[:2]
    mh, mw = _matrices(h, w, scale, out_size)
    out = np.tensordot(mh, arr, axes=(1, 0))
    out = np.tensordot(mw, out, axes=(1, 1))
    return np.swapaxes(out, 0, 1)


def bicubic_resize(x, scale: float, out_size=None):
    """Bicubic resize with output values clamped to [0, 1]."""
    out = resize(x, scale, out_size)
    if isinstance(out, torch.Tensor):
        return out.clamp(0.0, 1.0)
    return np.clip(out, 0.0, 1.0)


def space_to_depth(x, block: int = 8):
    """Move each ``block x block`` tile into the channel axis.

    Torch tensors are (N, C, H, W) -> (N, C*block**2, H/block, W/block) with
    channel index ``c*block**2 + i*block + j``; numpy images are H x W x C ->
    H/block x W/block x (block**2 * C) with the same ordering.
    """
    if isinstance(x, torch.Tensor):
        n, c, h, w = x.shape
        if h % block or w % block:
            raise ValueError(f"spatial dims {h}x{w} not divisible by block {block}")
        x = x.reshape(n, c, h // block, block, w // block, block)
        return x.permute(0, 1, 3, 5, 2, 4).reshape(n, c * block * block, h // block, w // block)
    arr = np.asarray(x)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    h, w, c = arr.shape
    if h % block or w % block:
        raise ValueError(f"spatial dims {h}x{w} not divisible by block {block}")
    arr = arr.reshape(h // block, block, w // block, block, c)
    return arr.transpose(0, 2, 4, 1, 3).reshape(h // block, w // block, c * block * block)


def depth_to_space(x, block: int = 8):
    """Exact inverse of :func:`space_to_depth`."""
    bb = block * block
    if isinstance(x, torch.Tensor):
        n, cb, h, w = x.shape
        if cb % bb:
            raise ValueError(f"channel count {cb} not divisible by block**2 = {bb}")
        x = x.reshape(n, cb // bb, block, block, h, w)
        return x.permute(0, 1, 4, 2, 5, 3).reshape(n, cb // bb, h * block, w * block)
    arr = np.asarray(x)
    h, w, cb = arr.shape
    if cb % bb:
        raise ValueError(f"channel count {cb} not divisible by block**2 = {bb}")
    arr = arr.reshape(h, w, cb // bb, block, block)
    return arr.transpose(0, 3, 1, 4, 2).reshape(h * block, w * block, cb // bb)
