"""Inference path (CRNet -> real codec -> PPNet), baselines and scale selection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .. import codec as _codec
from ..container import ContainerMetadata, pack
from ..networks import WeightSet, as_module, bicubic_resize, check_scale, compact_size
from .metrics import psnr, ssim
from .rd import RDCurve, RDPoint, interpolate_psnr


def _to_tensor(image: np.ndarray) -> torch.Tensor:
    return torch.as_tensor(_codec.as_hwc(image), dtype=torch.float32).permute(2, 0, 1)[None]


def _to_image(t: torch.Tensor) -> np.ndarray:
    return t[0].permute(1, 2, 0).detach().cpu().numpy().astype(np.float64)


def make_compact(image: np.ndarray, crnet, scale: float) -> np.ndarray:
    """``quantize(clamp(f(x)))`` as a [0, 1] image; bicubic downscale when ``crnet`` is None."""
    x = _codec.as_hwc(image)
    if crnet is None:
        c = bicubic_resize(x, scale)
    else:
        net = as_module(crnet, "CRNet", scale)
        with torch.no_grad():
            c = _to_image(net(_to_tensor(x).to(next(net.parameters()).dtype)))
    return _codec.dequantize_8bit(_codec.quantize_8bit(np.clip(c, 0.0, 1.0)))


def restore(decoded: np.ndarray, ppnet, scale: float, out_size: tuple[int, int]) -> np.ndarray:
    """``clamp(g(decoded))`` at ``out_size`` (H, W); bicubic upscale when ``ppnet`` is None."""
    if ppnet is None:
        out = bicubic_resize(decoded, 1.0 / scale, out_size) if scale != 1.0 else decoded
    else:
        net = as_module(ppnet, "PPNet", scale)
        with torch.no_grad():
            out = _to_image(net(_to_tensor(decoded).to(next(net.parameters()).dtype), out_size))
    return np.clip(out, 0.0, 1.0)


def model_id(ppnet) -> bytes:
    if ppnet is None:
        return bytes(8)
    if isinstance(ppnet, WeightSet):
        return ppnet.model_id()
    return WeightSet.from_module(ppnet).model_id()


def compress(image: np.ndarray, crnet, ppnet, qf: int, scale: float, backend=_codec.DEFAULT_BACKEND) -> bytes:
    """Encode ``image`` into a packed container file."""
    scale = check_scale(scale)
    x = _codec.as_hwc(image)
    h, w = x.shape[:2]
    compact = make_compact(x, crnet, scale)
    artifact = backend.encode(compact, qf)
    meta = ContainerMetadata(scale, artifact.qf, w, h, model_id(ppnet))
    return pack(artifact, meta)


def compress_eval(image, crnet, ppnet, qf: int, scale: float, codec=_codec.DEFAULT_BACKEND, method: str = "acn"):
    """Run the full inference path on one image.

    Returns the RD point (bpp charged for every byte of the container file)
    and the container bytes. ``crnet``/``ppnet`` set to None fall back to
    bicubic resampling.
    """
    scale = check_scale(scale)
    x = _codec.as_hwc(image)
    h, w = x.shape[:2]
    compact = make_compact(x, crnet, scale)
    artifact = codec.encode(compact, qf)
    blob = pack(artifact, ContainerMetadata(scale, artifact.qf, w, h, model_id(ppnet)))
    recon = restore(codec.decode(artifact), ppnet, scale, (h, w))
    point = RDPoint(
        bpp=8.0 * len(blob) / (h * w),
        psnr_db=psnr(x, recon),
        ssim=ssim(x, recon),
        qf=artifact.qf,
        scale=scale,
        method=method,
    )
    return point, blob


def jpeg_point(image, qf: int, codec=_codec.DEFAULT_BACKEND) -> RDPoint:
    """Plain JPEG at full resolution; bpp from the bare stream."""
    x = _codec.as_hwc(image)
    h, w = x.shape[:2]
    artifact = codec.encode(x, qf)
    recon = codec.decode(artifact)
    return RDPoint(artifact.bit_count / (h * w), psnr(x, recon), ssim(x, recon), qf, 1.0, "jpeg")


def bicubic_point(image, qf: int, scale: float = 0.5, codec=_codec.DEFAULT_BACKEND) -> RDPoint:
    """Bicubic downscale, JPEG, bicubic upscale; bpp from the bare stream (no metadata charged)."""
    x = _codec.as_hwc(image)
    h, w = x.shape[:2]
    artifact = codec.encode(make_compact(x, None, scale), qf)
    recon = restore(codec.decode(artifact), None, scale, (h, w))
    return RDPoint(artifact.bit_count / (h * w), psnr(x, recon), ssim(x, recon), qf, scale, "bicubic")


class Method:
    """Callable ``(image, qf) -> RDPoint`` usable with :func:`rd_sweep`."""

    def __init__(self, name: str, fn):
        self.name = name
        self._fn = fn

    def __call__(self, image, qf):
        return self._fn(image, qf)


def jpeg_method(codec=_codec.DEFAULT_BACKEND) -> Method:
    return Method("jpeg", lambda img, qf: jpeg_point(img, qf, codec))


def bicubic_method(scale: float = 0.5, codec=_codec.DEFAULT_BACKEND) -> Method:
    return Method(f"bicubic", lambda img, qf: bicubic_point(img, qf, scale, codec))


def network_method(crnet, ppnet, scale: float, name: str = "acn", codec=_codec.DEFAULT_BACKEND) -> Method:
    cr = as_module(crnet, "CRNet", scale) if crnet is not None else None
    pp = as_module(ppnet, "PPNet", scale) if ppnet is not None else None
    return Method(name, lambda img, qf: compress_eval(img, cr, pp, qf, scale, codec, name)[0])


# --------------------------------------------------------------------------
# adaptive scale selection
# --------------------------------------------------------------------------


class UnconfiguredRangeError(ValueError):
    pass


@dataclass(frozen=True)
class ScalePolicy:
    """Half-open quality ranges ``[lo, hi)`` mapped to scale factors, low rate to high rate."""

    ranges: tuple[tuple[int, int, float], ...] = ((1, 16, 0.5), (16, 31, 0.75), (31, 101, 1.0))

    def __post_init__(self):
        if len(self.ranges) != 3:
            raise UnconfiguredRangeError("a scale policy needs exactly three quality ranges")
        expected_lo = 1
        for lo, hi, s in self.ranges:
            check_scale(s)
            if lo != expected_lo or hi <= lo:
                raise UnconfiguredRangeError(f"quality ranges must tile [1, 101) without gaps: {self.ranges}")
            expected_lo = hi
        if expected_lo != 101:
            raise UnconfiguredRangeError(f"quality ranges must end at 101: {self.ranges}")
        if [r[2] for r in self.ranges] != [0.5, 0.75, 1.0]:
            raise UnconfiguredRangeError("ranges must map low/mid/high rate to 0.5/0.75/1.0")

    @classmethod
    def from_boundaries(cls, low_end: int, mid_end: int) -> "ScalePolicy":
        return cls(((1, low_end, 0.5), (low_end, mid_end, 0.75), (mid_end, 101, 1.0)))


DEFAULT_POLICY = ScalePolicy()


def select_scale(target_qf: int, policy: ScalePolicy | None = DEFAULT_POLICY) -> float:
    if policy is None:
        raise UnconfiguredRangeError("no scale policy configured")
    qf = _codec.check_quality(target_qf)
    for lo, hi, s in policy.ranges:
        if lo <= qf < hi:
            return s
    raise UnconfiguredRangeError(f"quality {qf} not covered by {policy}")


def calibrate_policy(reference: RDCurve, curves: dict[float, RDCurve]) -> ScalePolicy:
    """Derive quality boundaries from RD crossovers.

    Each point of ``reference`` (plain JPEG over a QF grid) sets a target rate;
    the scale whose curve reaches the highest PSNR at that rate wins the QF.
    Curves are only consulted inside their own bpp range. The low boundary is
    the first QF won by a scale above 0.5 and the mid boundary the first QF won
    by 1.0, so the resulting ranges are monotone by construction.
    """

    winners = []
    for point in sorted(reference.points, key=lambda p: p.qf):
        best, best_psnr = 1.0, point.psnr_db
        for s, curve in curves.items():
            if s == 1.0 or not curve.bpp[0] <= point.bpp <= curve.bpp[-1]:
                continue
            value = interpolate_psnr(curve, point.bpp)
            if value > best_psnr:
                best, best_psnr = s, value
        winners.append((point.qf, best))
    low_end = next((q for q, s in winners if s > 0.5), 101)
    mid_end = next((q for q, s in winners if s == 1.0 and q >= low_end), 101)
    low_end = min(max(low_end, 2), 99)
    mid_end = min(max(mid_end, low_end + 1), 100)
    return ScalePolicy.from_boundaries(low_end, mid_end)
