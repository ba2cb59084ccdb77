"""CSV / JSON / plot emission for RD curves."""

from __future__ import annotations

import csv
import io
import json
from itertools import permutations
from pathlib import Path
from typing import Sequence

from .rd import InsufficientPointsError, NoOverlapError, RDCurve, bd_rate

CSV_COLUMNS = ("method", "qf", "scale", "bpp", "psnr_db", "ssim")


def curves_csv(curves: Sequence[RDCurve]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for curve in curves:
        for p in curve.points:
            writer.writerow([curve.method, p.qf, f"{p.scale:g}", f"{p.bpp:.6f}", f"{p.psnr_db:.4f}", f"{p.ssim:.6f}"])
    return buf.getvalue()


def summary(curves: Sequence[RDCurve]) -> dict:
    """JSON-ready summary: per-curve points and BD-rate (PSNR and SSIM) for every ordered pair.

    Pairs that cannot be compared (fewer than 4 points, disjoint quality
    ranges) get ``null`` and a reason.
    """
    out = {"curves": {}, "bd_rate": []}
    for c in curves:
        out["curves"][c.method] = [
            {"qf": p.qf, "scale": p.scale, "bpp": round(p.bpp, 6), "psnr_db": round(p.psnr_db, 4), "ssim": round(p.ssim, 6)}
            for p in c.points
        ]
    for ref, test in permutations(curves, 2):
        entry = {"reference": ref.method, "test": test.method}
        for metric in ("psnr", "ssim"):
            try:
                entry[f"{metric}_percent"] = round(bd_rate(ref, test, metric), 4)
            except (InsufficientPointsError, NoOverlapError) as exc:
                entry[f"{metric}_percent"] = None
                entry[f"{metric}_error"] = str(exc)
        out["bd_rate"].append(entry)
    return out


def plot_curves(curves: Sequence[RDCurve], path, metric: str = "psnr"):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 4), dpi=100)
    for c in curves:
        ax.plot(c.bpp, getattr(c, metric), marker="o", label=c.method)
    ax.set_xlabel("bpp")
    ax.set_ylabel("PSNR (dB)" if metric == "psnr" else "SSIM")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    # fixed metadata keeps repeated runs byte-identical
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def emit_report(curves: Sequence[RDCurve], out_dir, plots: bool = True) -> dict[str, Path]:
    """Write ``rd_points.csv``, ``summary.json`` and RD plots into ``out_dir``."""
    if not curves:
        raise ValueError("emit_report needs at least one curve")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {"csv": out_dir / "rd_points.csv", "json": out_dir / "summary.json"}
    files["csv"].write_text(curves_csv(curves))
    files["json"].write_text(json.dumps(summary(curves), indent=2, sort_keys=True) + "\n")
    if plots:
        for metric in ("psnr", "ssim"):
            files[f"plot_{metric}"] = out_dir / f"rd_{metric}.png"
            plot_curves(curves, files[f"plot_{metric}"], metric)
    return files
