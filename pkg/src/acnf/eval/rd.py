"""Rate-distortion points, curves, sweeps and Bjontegaard delta rate."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..codec import check_quality


class InsufficientPointsError(ValueError):
    pass


class NoOverlapError(ValueError):
    pass


@dataclass(frozen=True)
class RDPoint:
    bpp: float
    psnr_db: float
    ssim: float
    qf: int
    scale: float
    method: str

    def __post_init__(self):
        if not self.bpp > 0:
            raise ValueError(f"bpp must be positive, got {self.bpp}")
        if not -1.0 <= self.ssim <= 1.0:
            raise ValueError(f"ssim must lie in [-1, 1], got {self.ssim}")
        check_quality(self.qf)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RDCurve:
    method: str
    points: tuple[RDPoint, ...] = field(default_factory=tuple)

    def __post_init__(self):
        pts = tuple(sorted(self.points, key=lambda p: p.bpp))
        for a, b in zip(pts, pts[1:]):
            if not b.bpp > a.bpp:
                raise ValueError(f"curve {self.method!r} bpp values must be strictly increasing")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    @property
    def bpp(self) -> np.ndarray:
        return np.array([p.bpp for p in self.points])

    @property
    def psnr(self) -> np.ndarray:
        return np.array([p.psnr_db for p in self.points])

    @property
    def ssim(self) -> np.ndarray:
        return np.array([p.ssim for p in self.points])


def bd_rate(reference: RDCurve, test: RDCurve, metric: str = "psnr") -> float:
    """Average bitrate difference (percent) of ``test`` against ``reference`` at equal quality.

    Each curve's log10(rate) is fitted with a cubic in the quality metric;
    the fits are integrated over the overlapping quality interval. Negative
    values mean ``test`` needs fewer bits.
    """
    for curve in (reference, test):
        if len(curve) < 4:
            raise InsufficientPointsError(f"curve {curve.method!r} has {len(curve)} points, need at least 4")
    q_ref = getattr(reference, metric)
    q_test = getattr(test, metric)
    lo = max(q_ref.min(), q_test.min())
    hi = min(q_ref.max(), q_test.max())
    if not hi > lo:
        raise NoOverlapError("quality ranges of the two curves do not overlap")
    p_ref = np.polyint(np.polyfit(q_ref, np.log10(reference.bpp), 3))
    p_test = np.polyint(np.polyfit(q_test, np.log10(test.bpp), 3))
    int_ref = np.polyval(p_ref, hi) - np.polyval(p_ref, lo)
    int_test = np.polyval(p_test, hi) - np.polyval(p_test, lo)
    delta = (int_test - int_ref) / (hi - lo)
    return float(100.0 * (10.0**delta - 1.0))


def average_points(points: Sequence[RDPoint], method: str | None = None) -> RDPoint:
    """Mean of per-image points taken at the same (qf, scale)."""
    return RDPoint(
        bpp=float(np.mean([p.bpp for p in points])),
        psnr_db=float(np.mean([p.psnr_db for p in points])),
        ssim=float(np.mean([p.ssim for p in points])),
        qf=points[0].qf,
        scale=points[0].scale,
        method=method or points[0].method,
    )


def rd_sweep(method: Callable, images: Sequence[np.ndarray], qfs: Sequence[int], name: str | None = None) -> RDCurve:
    """Evaluate ``method(image, qf) -> RDPoint`` over images and quality factors.

    Per quality factor, bpp, PSNR and SSIM are averaged over the images in
    input order; the result is sorted by bpp.
    """
    if len(images) < 1:
        raise ValueError("rd_sweep needs at least one image")
    if len(qfs) < 2:
        raise ValueError("rd_sweep needs at least two quality factors")
    name = name or getattr(method, "name", getattr(method, "__name__", "method"))
    pts = [average_points([method(img, qf) for img in images], name) for qf in qfs]
    return RDCurve(name, tuple(pts))


def interpolate_psnr(curve: RDCurve, bpp: float) -> float:
    """Piecewise-linear PSNR of ``curve`` at ``bpp`` (no extrapolation)."""
    if not curve.bpp[0] <= bpp <= curve.bpp[-1]:
        raise ValueError(f"bpp {bpp} outside curve range [{curve.bpp[0]}, {curve.bpp[-1]}]")
    return float(np.interp(bpp, curve.bpp, curve.psnr))
