import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from skimage.metrics import structural_similarity

from acnf.eval import PSNR_CAP, mse, psnr, ssim
from oracles import brute_psnr, brute_ssim


def test_psnr_identical_is_capped(rng):
    x = rng.uniform(size=(16, 16))
    assert psnr(x, x) == PSNR_CAP == 100.0


def test_psnr_uniform_offset():
    a = np.zeros((8, 8))
    b = np.full((8, 8), 16 / 255)
    assert psnr(a, b) == pytest.approx(10 * math.log10(65025 / 256), abs=1e-9)
    assert psnr(a, b) == pytest.approx(24.0484, abs=1e-4)


def test_psnr_matches_loop_oracle(rng):
    for _ in range(5):
        a, b = rng.uniform(size=(32, 32)), rng.uniform(size=(32, 32))
        assert psnr(a, b) == pytest.approx(brute_psnr(a, b), abs=1e-6)


def test_psnr_quantizes_first():
    a = np.full((8, 8), 0.5)
    assert psnr(a, a + 0.4 / 255) == PSNR_CAP


def test_psnr_shape_mismatch():
    with pytest.raises(ValueError):
        psnr(np.zeros((8, 8)), np.zeros((8, 9)))


def test_psnr_luma_and_rgb(rng):
    a = rng.uniform(size=(16, 16, 3))
    b = np.clip(a + rng.normal(scale=0.05, size=a.shape), 0, 1)
    w = np.array([0.299, 0.587, 0.114])
    qa, qb = np.rint(a * 255) @ w, np.rint(b * 255) @ w
    assert psnr(a, b) == pytest.approx(10 * math.log10(255**2 / np.mean((qa - qb) ** 2)), abs=1e-9)
    assert psnr(a, b, "rgb") == pytest.approx(10 * math.log10(255**2 / np.mean((np.rint(a * 255) - np.rint(b * 255)) ** 2)), abs=1e-9)
    assert mse(a, b, "rgb") > 0


def test_ssim_identity(rng):
    x = rng.uniform(size=(24, 24))
    assert ssim(x, x) == pytest.approx(1.0, abs=1e-12)


def test_ssim_constant_offset_closed_form():
    a = np.full((16, 16), 100 / 255)
    b = np.full((16, 16), 120 / 255)
    c1 = (0.01 * 255) ** 2
    expected = (2 * 100 * 120 + c1) / (100**2 + 120**2 + c1)
    assert ssim(a, b) == pytest.approx(expected, abs=1e-12)
    assert ssim(a, b) < 1


def test_ssim_matches_window_oracle(rng):
    a = rng.uniform(size=(32, 32))
    b = np.clip(a + rng.normal(scale=0.1, size=a.shape), 0, 1)
    assert ssim(a, b) == pytest.approx(brute_ssim(a, b), abs=1e-6)


def test_ssim_matches_skimage_reference(rng):
    a = rng.uniform(size=(40, 40))
    b = np.clip(a + rng.normal(scale=0.1, size=a.shape), 0, 1)
    ref = structural_similarity(
        np.rint(a * 255), np.rint(b * 255), gaussian_weights=True, sigma=1.5, use_sample_covariance=False, data_range=255
    )
    # skimage averages over a border-cropped full map; ours over fully contained windows
    assert ssim(a, b) == pytest.approx(ref, abs=2e-2)


def test_ssim_too_small():
    with pytest.raises(ValueError):
        ssim(np.zeros((10, 10)), np.zeros((10, 10)))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_ssim_symmetric(seed):
    r = np.random.default_rng(seed)
    a, b = r.uniform(size=(16, 16)), r.uniform(size=(16, 16))
    assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)
    assert -1 <= ssim(a, b) <= 1
