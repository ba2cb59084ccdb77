import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from acnf.networks import bicubic_resize, depth_to_space, resize, scaled_size, space_to_depth


def keys(t, a=-0.5):
    t = abs(t)
    if t <= 1:
        return (a + 2) * t**3 - (a + 3) * t**2 + 1
    if t < 2:
        return a * t**3 - 5 * a * t**2 + 8 * a * t - 4 * a
    return 0.0


def brute_resize_1d(v, scale):
    """Loop-based MATLAB-style bicubic along one axis."""
    n = len(v)
    m = scaled_size(n, scale)
    k = 1 / scale if scale < 1 else 1.0
    out = np.zeros(m)
    for i in range(m):
        u = (i + 1) / scale + 0.5 * (1 - 1 / scale)
        acc, norm = 0.0, 0.0
        for j in range(math.floor(u - 2 * k) - 2, math.ceil(u + 2 * k) + 3):
            wgt = keys((u - j) / k) / k
            if wgt == 0:
                continue
            src = j - 1
            while src < 0 or src >= n:  # mirror with edge repeat
                src = -src - 1 if src < 0 else 2 * n - src - 1
            acc += wgt * v[src]
            norm += wgt
        out[i] = acc / norm
    return out


def brute_resize(img, scale):
    rows = np.stack([brute_resize_1d(r, scale) for r in img])
    return np.stack([brute_resize_1d(c, scale) for c in rows.T]).T


def test_ramp_matches_oracle():
    ramp = np.tile(np.linspace(0, 1, 32), (32, 1))
    out = bicubic_resize(ramp, 0.5)
    assert out.shape == (16, 16)
    np.testing.assert_allclose(out, np.clip(brute_resize(ramp, 0.5), 0, 1), atol=1e-6)


@pytest.mark.parametrize("scale", [0.5, 0.75, 2.0, 4 / 3])
def test_random_matches_oracle(scale, rng):
    x = rng.uniform(size=(24, 20))
    np.testing.assert_allclose(resize(x, scale), brute_resize(x, scale), atol=1e-10)


def test_interior_agrees_with_pillow(rng):
    # Pillow's float bicubic uses the same kernel; borders differ (it renormalises instead of mirroring)
    x = rng.uniform(size=(64, 64)).astype(np.float32)
    ours = resize(x.astype(np.float64), 0.5)
    pil = np.asarray(Image.fromarray(x, mode="F").resize((32, 32), Image.BICUBIC))
    np.testing.assert_allclose(ours[3:-3, 3:-3], pil[3:-3, 3:-3], atol=1e-5)


@pytest.mark.parametrize("scale", [0.5, 0.75, 1.0, 2.0])
def test_constant_preserved(scale):
    x = np.full((40, 24), 0.3)
    out = bicubic_resize(x, scale)
    assert out.shape == (scaled_size(40, scale), scaled_size(24, scale))
    np.testing.assert_allclose(out, 0.3, atol=1e-12)


def test_scale_one_is_identity(rng):
    x = rng.uniform(size=(17, 23, 3))
    np.testing.assert_array_equal(resize(x, 1.0), x)


def test_clamped_and_unclamped(rng):
    x = (rng.uniform(size=(32, 32)) > 0.5).astype(float)
    raw = resize(x, 0.75)
    assert raw.min() < 0 or raw.max() > 1  # cubic overshoot on a binary image
    out = bicubic_resize(x, 0.75)
    assert out.min() >= 0 and out.max() <= 1


def test_torch_and_numpy_agree(rng):
    x = rng.uniform(size=(2, 3, 16, 24))
    t = resize(torch.as_tensor(x), 0.5).numpy()
    for n in range(2):
        np.testing.assert_allclose(t[n].transpose(1, 2, 0), resize(x[n].transpose(1, 2, 0), 0.5), atol=1e-12)


def test_invalid_scale():
    with pytest.raises(ValueError):
        resize(np.zeros((8, 8)), 0)


def test_round_half_up_size():
    assert scaled_size(10, 0.75) == 8  # 7.5 -> 8
    assert scaled_size(128, 0.75) == 96
    assert scaled_size(9, 0.5) == 5


# -- space to depth ---------------------------------------------------------


def test_s2d_shapes_and_order():
    x = np.arange(256, dtype=float).reshape(16, 16, 1)
    z = space_to_depth(x, 8)
    assert z.shape == (2, 2, 64)
    np.testing.assert_array_equal(z[0, 1], x[0:8, 8:16, 0].ravel())
    assert depth_to_space(z, 8).shape == (16, 16, 1)


def test_s2d_constant():
    z = space_to_depth(np.full((16, 24, 1), 0.7), 8)
    assert np.all(z == 0.7)


def test_s2d_matches_pixel_unshuffle(rng):
    x = torch.as_tensor(rng.uniform(size=(2, 3, 16, 24)))
    torch.testing.assert_close(space_to_depth(x, 8), torch.nn.functional.pixel_unshuffle(x, 8))
    z = space_to_depth(x, 8)
    torch.testing.assert_close(depth_to_space(z, 8), torch.nn.functional.pixel_shuffle(z, 8))


def test_s2d_errors():
    with pytest.raises(ValueError):
        space_to_depth(np.zeros((12, 16, 1)), 8)
    with pytest.raises(ValueError):
        depth_to_space(np.zeros((2, 2, 63)), 8)
    with pytest.raises(ValueError):
        depth_to_space(torch.zeros(1, 63, 2, 2), 8)


@settings(max_examples=50, deadline=None)
@given(hb=st.integers(1, 5), wb=st.integers(1, 5), c=st.sampled_from([1, 3]), block=st.sampled_from([2, 4, 8]))
def test_s2d_inverse_property(hb, wb, c, block):
    x = np.random.default_rng(hb * 100 + wb).uniform(size=(hb * block, wb * block, c))
    np.testing.assert_array_equal(depth_to_space(space_to_depth(x, block), block), x)
    z = space_to_depth(x, block)
    np.testing.assert_array_equal(space_to_depth(depth_to_space(z, block), block), z)
