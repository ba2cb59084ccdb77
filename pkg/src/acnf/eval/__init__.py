"""Quality metrics, rate-distortion evaluation and reporting."""

from .metrics import PSNR_CAP, mse, psnr, ssim
from .pipeline import (
    DEFAULT_POLICY,
    Method,
    ScalePolicy,
    UnconfiguredRangeError,
    bicubic_method,
    bicubic_point,
    calibrate_policy,
    compress,
    compress_eval,
    jpeg_method,
    jpeg_point,
    make_compact,
    network_method,
    restore,
    select_scale,
)
from .rd import (
    InsufficientPointsError,
    NoOverlapError,
    RDCurve,
    RDPoint,
    average_points,
    bd_rate,
    interpolate_psnr,
    rd_sweep,
)
from .report import emit_report, summary

__all__ = [
    "DEFAULT_POLICY",
    "InsufficientPointsError",
    "Method",
    "NoOverlapError",
    "PSNR_CAP",
    "RDCurve",
    "RDPoint",
    "ScalePolicy",
    "UnconfiguredRangeError",
    "average_points",
    "bd_rate",
    "bicubic_method",
    "bicubic_point",
    "calibrate_policy",
    "compress",
    "compress_eval",
    "emit_report",
    "interpolate_psnr",
    "jpeg_method",
    "jpeg_point",
    "make_compact",
    "mse",
    "network_method",
    "psnr",
    "rd_sweep",
    "restore",
    "select_scale",
    "ssim",
    "summary",
]
