import numpy as np
import pytest
import torch


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _seed_torch():
    torch.manual_seed(0)


def natural_patch(size=128, seed=0):
    """Smooth random texture with a few edges; stands in for a natural image patch."""
    r = np.random.default_rng(seed)
    base = r.normal(size=(size // 8 + 1, size // 8 + 1))
    yy, xx = np.mgrid[0:size, 0:size] / 8.0
    img = np.zeros((size, size))
    for (dy, dx), w in zip([(0, 0), (1, 0), (0, 1), (1, 1)], [1, 1, 1, 1]):
        img += w * base[(yy.astype(int) + dy).clip(max=base.shape[0] - 1), (xx.astype(int) + dx).clip(max=base.shape[1] - 1)]
    img = 0.5 + 0.12 * img / 4 + 0.2 * (xx > size / 16) - 0.1 * (yy > size / 10)
    img += 0.02 * r.normal(size=img.shape)
    return np.clip(img, 0, 1)
