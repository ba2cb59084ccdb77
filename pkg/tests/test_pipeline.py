import numpy as np
import pytest

from acnf import codec, container
from acnf.eval import (
    RDCurve,
    RDPoint,
    ScalePolicy,
    bicubic_point,
    calibrate_policy,
    compress,
    compress_eval,
    jpeg_point,
    select_scale,
)
from acnf.networks import NetworkSpec, build_network
from conftest import natural_patch


@pytest.fixture(scope="module")
def image():
    return natural_patch(96, seed=7)[..., None]


def untrained(kind, scale):
    return build_network(NetworkSpec.default(kind, scale=scale, depth=2, width=8))


@pytest.mark.parametrize("scale", [0.5, 0.75, 1.0])
def test_bpp_counts_container_bytes(image, scale):
    point, blob = compress_eval(image, None, None, 30, scale)
    assert point.bpp * 96 * 96 == pytest.approx(8 * len(blob))
    art, meta = container.unpack(blob)
    assert meta.scale == scale and meta.qf == 30


def test_scale_one_without_networks_is_jpeg(image):
    point, blob = compress_eval(image, None, None, 40, 1.0)
    ref = jpeg_point(image, 40)
    assert point.psnr_db == pytest.approx(ref.psnr_db)
    assert point.bpp == pytest.approx(ref.bpp + 8 * container.SEGMENT_OVERHEAD / 96**2)


def test_untrained_networks_reproduce_bicubic(image):
    """Zero-initialised residual heads reduce both networks to their bicubic skip paths."""
    net_point, _ = compress_eval(image, untrained("CRNet", 0.5), untrained("PPNet", 0.5), 20, 0.5)
    ref = bicubic_point(image, 20, 0.5)
    assert net_point.psnr_db == pytest.approx(ref.psnr_db, abs=0.02)
    assert net_point.bpp == pytest.approx(ref.bpp + 8 * container.SEGMENT_OVERHEAD / 96**2, abs=0.01)


def test_compress_is_stock_decodable(image):
    blob = compress(image, None, None, 10, 0.5)
    stock = codec.decode(codec.artifact_from_bytes(blob))
    assert stock.shape == (48, 48, 1)


def test_select_scale_boundaries():
    policy = ScalePolicy.from_boundaries(6, 21)
    assert [select_scale(q, policy) for q in (1, 5, 6, 20, 21, 100)] == [0.5, 0.5, 0.75, 0.75, 1.0, 1.0]
    assert select_scale(15) == 0.5 and select_scale(80) == 1.0


def _curve(name, scale, bpps, psnrs, qfs=None):
    qfs = qfs or list(range(1, len(bpps) + 1))
    return RDCurve(name, tuple(RDPoint(b, p, 0.9, q, scale, name) for b, p, q in zip(bpps, psnrs, qfs)))


def test_calibrate_policy_from_crossovers():
    bpp = np.linspace(0.1, 1.0, 10)
    jpeg = _curve("jpeg", 1.0, bpp, 20 + 10 * bpp)
    # half scale wins up to 0.2 bpp, three-quarter scale up to 0.5 bpp
    half = _curve("half", 0.5, bpp, 20 + 10 * bpp + 4.5 - 15 * bpp)
    three = _curve("three", 0.75, bpp, 20 + 10 * bpp + 1.5 - 2.5 * bpp)
    policy = calibrate_policy(jpeg, {0.5: half, 0.75: three})
    # jpeg qf k sits at bpp 0.1 * k
    assert policy.ranges == ((1, 3, 0.5), (3, 6, 0.75), (6, 101, 1.0))


def test_calibrate_policy_ignores_out_of_range_curves():
    bpp = np.linspace(0.1, 1.0, 10)
    jpeg = _curve("jpeg", 1.0, bpp, 20 + 10 * bpp)
    half = _curve("half", 0.5, [0.01, 0.02], [50, 51])
    policy = calibrate_policy(jpeg, {0.5: half})
    assert policy.ranges[0] == (1, 2, 0.5)
