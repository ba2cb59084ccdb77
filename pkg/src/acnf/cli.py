"""Command-line entry points.

Every command logs a JSON run header (codec identity, weight hashes, config
hash, seed) to stderr. Failures print one JSON object
``{"error": <kind>, "message": ..., "exit_code": n}`` to stderr and exit with
the code listed in :data:`EXIT_CODES`.
"""

from __future__ import annotations

import json
import logging
import os
import sys
import warnings
from pathlib import Path

import click
import numpy as np

from . import codec, container
from .data import (
    EmptyDatasetError,
    PatchStore,
    RandomCropSource,
    build_codec_cache,
    ingest_dataset,
    load_image,
    save_image,
)
from .eval import (
    RDCurve,
    RDPoint,
    average_points,
    bd_rate,
    bicubic_method,
    emit_report,
    jpeg_method,
    network_method,
    rd_sweep,
    restore,
    select_scale,
)
from .eval.pipeline import compress as compress_image
from .eval.report import plot_curves
from .networks import MissingWeightsError, SpecMismatchError, find_weights, save_weights
from .training import (
    BadConfigError,
    DivergenceError,
    TrainConfig,
    pretrain_acn,
    pretrain_benet,
    pretrain_crnet,
    pretrain_ppnet,
    train_end_to_end,
)

log = logging.getLogger("acnf")

EXIT_CODES = {
    "internal": 1,
    "bad_config": 3,
    "missing_weights": 4,
    "codec": 5,
    "data": 6,
    "divergence": 7,
    "container": 8,
}
WEIGHTS_ENV = "ACNF_WEIGHTS_DIR"
STORE_FILE = "patches.json"


class CommandError(Exception):
    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


def _classify(exc: Exception) -> str:
    if isinstance(exc, CommandError):
        return exc.kind
    if isinstance(exc, BadConfigError):
        return "bad_config"
    if isinstance(exc, (MissingWeightsError, SpecMismatchError)):
        return "missing_weights"
    if isinstance(exc, (container.MalformedArtifactError, container.CorruptMetadataError)):
        return "container"
    if isinstance(exc, codec.CodecError):
        return "codec"
    if isinstance(exc, (EmptyDatasetError, FileNotFoundError)):
        return "data"
    if isinstance(exc, DivergenceError):
        return "divergence"
    return "internal"


class Group(click.Group):
    """Turns library exceptions into a JSON error line and a distinct exit code."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except (click.exceptions.Exit, click.ClickException, click.exceptions.Abort):
            raise
        except Exception as exc:
            kind = _classify(exc)
            code = EXIT_CODES[kind]
            click.echo(json.dumps({"error": kind, "message": str(exc), "exit_code": code}), err=True)
            ctx.exit(code)


def _header(cfg: TrainConfig | None = None, weights: dict | None = None, seed: int | None = None):
    head = {
        "codec": codec.DEFAULT_BACKEND.identity(),
        "weights": {k: w.model_id().hex() for k, w in sorted((weights or {}).items())},
        "config_sha256": cfg.digest() if cfg else None,
        "seed": cfg.seed if cfg else seed,
    }
    log.info("run header %s", json.dumps(head, sort_keys=True))
    return head


def _weights_root(value) -> Path:
    root = value or os.environ.get(WEIGHTS_ENV)
    if not root:
        raise CommandError("missing_weights", f"no weights directory given (use --weights or set {WEIGHTS_ENV})")
    return Path(root)


def _load_config(path) -> TrainConfig:
    return TrainConfig.load(path) if path else TrainConfig()


def _cache_dir(data_dir, qf: int, scale: float, transform: str) -> Path:
    return Path(data_dir) / "cache" / f"qf{qf}_s{scale:g}_{transform}"


def _load_store(data_dir) -> PatchStore:
    path = Path(data_dir) / STORE_FILE
    if not path.is_file():
        raise EmptyDatasetError(f"no patch store at {path}; run prepare-data first")
    return PatchStore.load(path)


def _parse_qfs(text: str) -> list[int]:
    try:
        return [codec.check_quality(int(t)) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from exc


def _parse_scale(text: str, qf: int) -> float:
    if text == "auto":
        return select_scale(qf)
    try:
        return float(text)
    except ValueError as exc:
        raise click.BadParameter(f"scale must be auto, 0.5, 0.75 or 1.0, got {text}") from exc


@click.group(cls=Group, context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--log-level", default="INFO", show_default=True, type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"]))
def main(log_level):
    """Learned pre/postprocessing around a stock JPEG codec."""
    logging.basicConfig(level=log_level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)


# --------------------------------------------------------------------------
# data
# --------------------------------------------------------------------------


@main.command("prepare-data")
@click.option("--images", required=True, type=click.Path(exists=True, file_okay=False), help="Folder of source images.")
@click.option("--out", required=True, type=click.Path(file_okay=False), help="Output data directory.")
@click.option("--patch-size", default=128, show_default=True, type=int)
@click.option("--split-ratio", default=0.95, show_default=True, type=float, help="Fraction of images in the train split.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--layout", default="luma", show_default=True, type=click.Choice(["luma", "rgb"]))
@click.option("--qfs", default="", help="Also build codec caches at these QFs (comma separated).")
@click.option("--scale", default=1.0, show_default=True, type=float, help="Scale for cached bicubic_down transforms.")
@click.option("--transform", default="none", show_default=True, type=click.Choice(["none", "bicubic_down"]))
def prepare_data(images, out, patch_size, split_ratio, seed, layout, qfs, scale, transform):
    """Extract patches (and optionally codec caches) from a folder of images."""
    _header(seed=seed)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    store = ingest_dataset(images, patch_size=patch_size, split_ratio=split_ratio, seed=seed, layout=layout)
    store.save(out / STORE_FILE)
    result = {"store": str(out / STORE_FILE), "patches": len(store.patches), "caches": []}
    for qf in _parse_qfs(qfs):
        cache = build_codec_cache(store, qf, scale, transform, root=_cache_dir(out, qf, scale, transform))
        result["caches"].append({"qf": qf, "entries": len(cache)})
    click.echo(json.dumps(result))


# --------------------------------------------------------------------------
# pretraining
# --------------------------------------------------------------------------


def _source(data_dir, cfg: TrainConfig, source: str, transform: str = "none", scale: float = 1.0):
    store = _load_store(data_dir)
    if source == "cache":
        return build_codec_cache(store, cfg.qf, scale, transform, root=_cache_dir(data_dir, cfg.qf, scale, transform))
    return RandomCropSource.from_store(store, qf=cfg.qf, scale=scale, transform=transform)


def _pretrain_command(name: str, kind: str, fn, transform: str):
    @main.command(name, help=f"Pretrain {kind} and write its weight set.")
    @click.option("--config", "config_path", type=click.Path(dir_okay=False), help="TrainConfig JSON.")
    @click.option("--data", "data_dir", required=True, type=click.Path(exists=True, file_okay=False), help="Directory from prepare-data.")
    @click.option("--out", "weights", type=click.Path(file_okay=False), help=f"Weights root (default ${WEIGHTS_ENV}).")
    @click.option("--steps", type=int, help="Override the configured step count.")
    @click.option("--source", default="crops", show_default=True, type=click.Choice(["crops", "cache"]), help="Random crops or the fixed patch cache.")
    def command(config_path, data_dir, weights, steps, source):
        cfg = _load_config(config_path)
        _header(cfg)
        scale = cfg.scale if transform == "bicubic_down" else 1.0
        ws = fn(_source(data_dir, cfg, source, transform, scale), cfg, steps=steps)
        path = save_weights(ws, _weights_root(weights))
        click.echo(json.dumps({"weights": str(path), "model_id": ws.model_id().hex(), "steps": ws.training_step}))

    return command


_pretrain_command("pretrain-acn", "ACN", pretrain_acn, "none")
_pretrain_command("pretrain-benet", "BENet", pretrain_benet, "none")
_pretrain_command("pretrain-crnet", "CRNet", pretrain_crnet, "none")
_pretrain_command("pretrain-ppnet", "PPNet", pretrain_ppnet, "bicubic_down")


@main.command("train")
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False), help="TrainConfig JSON.")
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--weights", type=click.Path(file_okay=False), help=f"Pretrained weights root (default ${WEIGHTS_ENV}).")
@click.option("--out", "run_dir", required=True, type=click.Path(file_okay=False), help="Run directory.")
@click.option("--steps", type=int, help="Override steps_finetune.")
@click.option("--resume/--no-resume", default=False, show_default=True, help="Continue from the latest checkpoint in the run directory.")
def train(config_path, data_dir, weights, run_dir, steps, resume):
    """Joint CRNet/PPNet training with per-minibatch ACN/BENet refresh."""
    cfg = _load_config(config_path)
    root = _weights_root(weights)
    init = {}
    for kind in ("CRNet", "PPNet", "ACN", "BENet"):
        scale = cfg.scale if kind in ("CRNet", "PPNet") else 1.0
        init[kind] = find_weights(root, kind, cfg.qf, scale)
    _header(cfg, init)
    source = RandomCropSource.from_store(_load_store(data_dir), qf=cfg.qf)
    result = train_end_to_end(source, cfg, init, steps=steps, run_dir=run_dir, resume=resume)
    click.echo(json.dumps({"run_dir": str(run_dir), "steps": result.step, "final": result.log[-1] if result.log else None}))


# --------------------------------------------------------------------------
# inference
# --------------------------------------------------------------------------


@main.command("compress")
@click.option("--in", "src", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--qf", required=True, type=int)
@click.option("--scale", "scale_text", default="auto", show_default=True, help="auto, 0.5, 0.75 or 1.0.")
@click.option("--weights", type=click.Path(file_okay=False), help=f"Weights root (default ${WEIGHTS_ENV}).")
@click.option("--layout", default="luma", show_default=True, type=click.Choice(["luma", "rgb"]))
@click.option("--out", "dst", required=True, type=click.Path(dir_okay=False))
def compress(src, qf, scale_text, weights, layout, dst):
    """Compress an image into a standard-decodable container file."""
    qf = codec.check_quality(qf)
    scale = _parse_scale(scale_text, qf)
    root = _weights_root(weights)
    crnet = find_weights(root, "CRNet", qf, scale, nearest=True)
    ppnet = find_weights(root, "PPNet", qf, scale, nearest=True)
    _header(weights={"CRNet": crnet, "PPNet": ppnet}, seed=0)
    image = load_image(src, layout)
    if image.shape[2] != crnet.spec.channels:
        raise CommandError("missing_weights", f"weights expect {crnet.spec.channels} channels, image has {image.shape[2]}")
    blob = compress_image(image, crnet, ppnet, qf, scale)
    Path(dst).write_bytes(blob)
    h, w = image.shape[:2]
    click.echo(json.dumps({"out": str(dst), "bytes": len(blob), "bpp": 8 * len(blob) / (h * w), "qf": qf, "scale": scale}))


@main.command("decompress")
@click.option("--in", "src", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--weights", type=click.Path(file_okay=False), help=f"Weights root (default ${WEIGHTS_ENV}).")
@click.option("--out", "dst", required=True, type=click.Path(dir_okay=False))
def decompress(src, weights, dst):
    """Decode a container file; plain JPEG or missing weights fall back to stock decoding."""
    artifact, meta = container.unpack(Path(src).read_bytes())
    decoded = codec.decode(artifact)
    mode = "stock"
    if meta is None:
        warnings.warn("no framework metadata found; using the stock decode")
        image = decoded
    else:
        size = (meta.orig_height, meta.orig_width)
        root = weights or os.environ.get(WEIGHTS_ENV)
        ppnet = None
        if root:
            try:
                ppnet = find_weights(root, "PPNet", meta.qf, meta.scale, nearest=True)
            except MissingWeightsError:
                ppnet = None
        if ppnet is None:
            warnings.warn("PPNet weights not found; using the stock decode with bicubic upscaling")
        else:
            mode = "ppnet"
            if ppnet.model_id() != meta.model_id and any(meta.model_id):
                warnings.warn("PPNet weights differ from the ones recorded at compression time")
            if ppnet.spec.channels != decoded.shape[2]:
                raise CommandError("missing_weights", "PPNet channel count does not match the stream")
        _header(weights={"PPNet": ppnet} if ppnet else {}, seed=0)
        image = restore(decoded, ppnet, meta.scale, size)
    save_image(dst, image)
    click.echo(json.dumps({"out": str(dst), "mode": mode, "height": image.shape[0], "width": image.shape[1]}))


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------


def _image_folder(path, layout) -> list[np.ndarray]:
    files = sorted(p for p in Path(path).iterdir() if p.suffix.lower() in {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".ppm", ".pgm"})
    if not files:
        raise EmptyDatasetError(f"no images in {path}")
    return [load_image(p, layout) for p in files]


@main.command("eval")
@click.option("--methods", default="jpeg,bicubic,acn", show_default=True, help="Comma separated subset of jpeg, bicubic, acn.")
@click.option("--images", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--qfs", default="10,20,40,80", show_default=True)
@click.option("--scale", "scale_text", default="0.5", show_default=True, help="Scale for bicubic and acn (auto picks per QF for acn).")
@click.option("--weights", type=click.Path(file_okay=False), help=f"Weights root for acn (default ${WEIGHTS_ENV}).")
@click.option("--layout", default="luma", show_default=True, type=click.Choice(["luma", "rgb"]))
@click.option("--out", required=True, type=click.Path(file_okay=False), help="Report directory.")
@click.option("--plots/--no-plots", default=True, show_default=True)
def evaluate(methods, images, qfs, scale_text, weights, layout, out, plots):
    """RD sweep of the selected methods; writes CSV, BD-rate summary and plots."""
    qfs = _parse_qfs(qfs)
    if len(qfs) < 2:
        raise click.BadParameter("an RD sweep needs at least two quality factors", param_hint="--qfs")
    names = [m.strip() for m in methods.split(",") if m.strip()]
    unknown = set(names) - {"jpeg", "bicubic", "acn"}
    if unknown or not names:
        raise click.BadParameter(f"unknown methods {sorted(unknown)}", param_hint="--methods")
    imgs = _image_folder(images, layout)
    curves = []
    loaded = {}
    for name in names:
        if name == "jpeg":
            curves.append(rd_sweep(jpeg_method(), imgs, qfs))
        elif name == "bicubic":
            s = 0.5 if scale_text == "auto" else float(scale_text)
            curves.append(rd_sweep(bicubic_method(s), imgs, qfs))
        else:
            root = _weights_root(weights)
            points = []
            for qf in qfs:
                s = _parse_scale(scale_text, qf)
                cr = find_weights(root, "CRNet", qf, s, nearest=True)
                pp = find_weights(root, "PPNet", qf, s, nearest=True)
                loaded[f"CRNet@{s:g}"], loaded[f"PPNet@{s:g}"] = cr, pp
                method = network_method(cr, pp, s)
                points.append(average_points([method(img, qf) for img in imgs], "acn"))
            curves.append(RDCurve("acn", tuple(points)))
    _header(weights=loaded, seed=0)
    paths = emit_report(curves, out, plots=plots)
    click.echo(json.dumps({k: str(v) for k, v in paths.items()}))


def _read_curves(csv_path) -> list[RDCurve]:
    import csv

    by_method: dict[str, list[RDPoint]] = {}
    with open(csv_path, newline="") as fh:
        for row in csv.DictReader(fh):
            point = RDPoint(float(row["bpp"]), float(row["psnr_db"]), float(row["ssim"]), int(row["qf"]), float(row["scale"]), row["method"])
            by_method.setdefault(row["method"], []).append(point)
    if not by_method:
        raise EmptyDatasetError(f"no RD points in {csv_path}")
    return [RDCurve(name, pts) for name, pts in by_method.items()]


@main.command("bdrate")
@click.option("--csv", "csv_path", required=True, type=click.Path(exists=True, dir_okay=False), help="rd_points.csv from eval.")
@click.option("--anchor", required=True, help="Reference method name.")
@click.option("--test", "test_name", required=True, help="Test method name.")
@click.option("--metric", default="psnr", show_default=True, type=click.Choice(["psnr", "ssim"]))
def bdrate(csv_path, anchor, test_name, metric):
    """BD-rate (percent) of one method against another."""
    curves = {c.method: c for c in _read_curves(csv_path)}
    for name in (anchor, test_name):
        if name not in curves:
            raise CommandError("data", f"method {name!r} not in {csv_path}")
    value = bd_rate(curves[anchor], curves[test_name], metric)
    click.echo(json.dumps({"anchor": anchor, "test": test_name, "metric": metric, "bd_rate_percent": value}))


@main.command("plot")
@click.option("--csv", "csv_path", required=True, type=click.Path(exists=True, dir_okay=False), help="rd_points.csv from eval.")
@click.option("--out", required=True, type=click.Path(file_okay=False))
def plot(csv_path, out):
    """Redraw the PSNR and SSIM RD plots from a points CSV."""
    curves = _read_curves(csv_path)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    for metric in ("psnr", "ssim"):
        path = out / f"rd_{metric}.png"
        plot_curves(curves, path, metric)
        written[metric] = str(path)
    click.echo(json.dumps(written))


if __name__ == "__main__":  # pragma: no cover
    main()
