import json

import numpy as np
import pytest

from acnf.eval import (
    DEFAULT_POLICY,
    InsufficientPointsError,
    NoOverlapError,
    RDCurve,
    RDPoint,
    ScalePolicy,
    UnconfiguredRangeError,
    average_points,
    bd_rate,
    emit_report,
    interpolate_psnr,
    jpeg_method,
    rd_sweep,
    select_scale,
    summary,
)
from oracles import trapezoid_bd_rate
from conftest import natural_patch


def curve(name, bpps, psnrs, ssims=None, qfs=None):
    ssims = ssims or [0.5 + 0.01 * i for i in range(len(bpps))]
    qfs = qfs or list(range(10, 10 + 10 * len(bpps), 10))
    return RDCurve(name, tuple(RDPoint(b, p, s, q, 1.0, name) for b, p, s, q in zip(bpps, psnrs, ssims, qfs)))


REF = curve("ref", [0.2, 0.4, 0.8, 1.6], [28.0, 31.0, 34.5, 38.0])


def test_identical_curves_zero():
    assert bd_rate(REF, REF) == pytest.approx(0.0, abs=1e-9)


def test_halved_rates():
    half = curve("half", list(REF.bpp / 2), list(REF.psnr))
    assert bd_rate(REF, half) == pytest.approx(-50.0, abs=1e-9)
    assert bd_rate(half, REF) == pytest.approx(100.0, abs=1e-9)


def test_quartic_curves_match_trapezoid_oracle():
    q = np.linspace(26, 40, 6)
    ref_rate = 10 ** (0.002 * (q - 30) ** 4 / 100 + 0.08 * q - 3)
    test_rate = 10 ** (0.003 * (q - 31) ** 4 / 100 + 0.075 * q - 2.9)
    a = curve("a", list(ref_rate), list(q))
    b = curve("b", list(test_rate), list(q + 0.3))
    assert bd_rate(a, b) == pytest.approx(trapezoid_bd_rate(ref_rate, q, test_rate, q + 0.3), abs=0.1)


def test_antisymmetry_small_delta():
    b = curve("b", list(REF.bpp * 0.97), list(REF.psnr + 0.05))
    ab, ba = bd_rate(REF, b), bd_rate(b, REF)
    assert ab == pytest.approx(-ba / (1 + ba / 100), abs=0.05)


def test_ssim_metric():
    half = curve("half", list(REF.bpp / 2), list(REF.psnr), list(REF.ssim))
    assert bd_rate(REF, half, "ssim") == pytest.approx(-50.0, abs=1e-9)


def test_errors():
    short = curve("s", [0.1, 0.2, 0.3], [20, 21, 22])
    with pytest.raises(InsufficientPointsError):
        bd_rate(REF, short)
    far = curve("far", [0.1, 0.2, 0.3, 0.4], [50, 51, 52, 53])
    with pytest.raises(NoOverlapError):
        bd_rate(REF, far)


def test_point_and_curve_invariants():
    with pytest.raises(ValueError):
        RDPoint(0.0, 30, 0.9, 10, 1.0, "x")
    with pytest.raises(ValueError):
        RDPoint(0.1, 30, 1.5, 10, 1.0, "x")
    with pytest.raises(ValueError):
        curve("dup", [0.1, 0.1, 0.2, 0.3], [1, 2, 3, 4])
    c = RDCurve("u", (REF.points[2], REF.points[0], REF.points[1]))
    assert list(c.bpp) == sorted(c.bpp)


def test_average_points():
    pts = [RDPoint(0.2, 30, 0.8, 10, 0.5, "m"), RDPoint(0.4, 32, 0.9, 10, 0.5, "m")]
    avg = average_points(pts)
    assert (avg.bpp, avg.psnr_db, avg.ssim) == pytest.approx((0.3, 31, 0.85))


def test_jpeg_sweep_monotone():
    imgs = [natural_patch(64, seed=s) for s in range(2)]
    c = rd_sweep(jpeg_method(), imgs, [10, 20, 40, 80])
    assert len(c) == 4
    assert np.all(np.diff(c.bpp) > 0) and np.all(np.diff(c.psnr) > 0)
    single = rd_sweep(jpeg_method(), imgs[:1], [10, 20, 40, 80])
    pts = [jpeg_method()(img, 20) for img in imgs]
    assert c.points[1].bpp == pytest.approx(np.mean([p.bpp for p in pts]))
    assert len(single) == 4
    with pytest.raises(ValueError):
        rd_sweep(jpeg_method(), imgs, [10])


def test_interpolate_psnr():
    assert interpolate_psnr(REF, 0.3) == pytest.approx(29.5)
    with pytest.raises(ValueError):
        interpolate_psnr(REF, 5.0)


def test_report_files_and_determinism(tmp_path):
    half = curve("half", list(REF.bpp / 2), list(REF.psnr))
    files = emit_report([REF, half], tmp_path / "a")
    emit_report([REF, half], tmp_path / "b")
    rows = files["csv"].read_text().strip().splitlines()
    assert rows[0] == "method,qf,scale,bpp,psnr_db,ssim" and len(rows) == 9
    for name in ("rd_points.csv", "summary.json", "rd_psnr.png", "rd_ssim.png"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    data = json.loads(files["json"].read_text())
    pairs = {(e["reference"], e["test"]): e for e in data["bd_rate"]}
    assert pairs[("ref", "half")]["psnr_percent"] == pytest.approx(-50.0)
    assert pairs[("half", "ref")]["psnr_percent"] == pytest.approx(100.0)


def test_summary_reports_uncomputable_pairs():
    short = curve("s", [0.1, 0.2, 0.3], [28, 29, 30])
    out = summary([REF, short])
    assert out["bd_rate"][0]["psnr_percent"] is None and "psnr_error" in out["bd_rate"][0]


def test_select_scale_default_policy():
    assert select_scale(10) == 0.5
    assert select_scale(15) == 0.5
    assert select_scale(80) == 1.0
    for qf in range(1, 101):
        hits = [s for lo, hi, s in DEFAULT_POLICY.ranges if lo <= qf < hi]
        assert len(hits) == 1


def test_scale_policy_validation():
    with pytest.raises(UnconfiguredRangeError):
        select_scale(10, None)
    with pytest.raises(UnconfiguredRangeError):
        ScalePolicy(((1, 20, 0.5), (25, 40, 0.75), (40, 101, 1.0)))
    with pytest.raises(UnconfiguredRangeError):
        ScalePolicy(((1, 20, 0.5), (20, 101, 1.0)))
    p = ScalePolicy.from_boundaries(12, 50)
    assert (select_scale(11, p), select_scale(12, p), select_scale(50, p)) == (0.5, 0.75, 1.0)
