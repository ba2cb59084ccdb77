"""Simultaneous end-to-end training of CRNet and PPNet through the codec surrogates.

Each minibatch:

(a) ``x_hat = g(h(f(x)))`` and ``bit = p(f(x))`` with ACN ``h`` and BENet ``p``
    frozen; one Adam step on CRNet ``f`` and PPNet ``g``;
(b) every compact image ``f(x)`` is quantized to 8 bits and sent through the
    real codec, giving ``Phi(f(x))`` and its bit count;
(c) one step each on ACN and BENet towards those fresh codec outputs.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import torch

from .. import codec
from ..networks import WeightSet, save_weights
from .config import TrainConfig
from .losses import NonFiniteLossError, frozen_call, total_loss
from .pretrain import adam, to_nchw

log = logging.getLogger(__name__)

LOG_COLUMNS = ("step", "rec", "bit", "reg", "total", "real_bpp", "acn_psnr")
KINDS = ("CRNet", "PPNet", "ACN", "BENet")


class DivergenceError(RuntimeError):
    """Raised when the total loss is non-finite or jumps far above its running average."""


class GradientLeakError(AssertionError):
    """Raised when a surrogate received a gradient during the CRNet/PPNet update."""


@dataclass
class TrainResult:
    weights: dict[str, WeightSet]
    log: list[dict]
    step: int
    run_dir: Path | None = None

    @property
    def crnet(self) -> WeightSet:
        return self.weights["CRNet"]

    @property
    def ppnet(self) -> WeightSet:
        return self.weights["PPNet"]


@dataclass
class _State:
    modules: dict
    optimizers: dict
    rng: np.random.Generator
    step: int = 0
    ema: float | None = None
    rows: list = field(default_factory=list)


def run_header(cfg: TrainConfig, weights: dict, backend=codec.DEFAULT_BACKEND) -> dict:
    """Everything needed to reconstruct a run: codec identity, weight hashes, config hash and seed."""
    return {
        "codec": backend.identity(),
        "weights": {k: w.model_id().hex() for k, w in sorted(weights.items())},
        "config_sha256": cfg.digest(),
        "seed": cfg.seed,
    }


def _quantize_batch(c: torch.Tensor) -> np.ndarray:
    """Compact batch (N, C, h, w) -> 8-bit samples (N, h, w, C)."""
    arr = c.detach().permute(0, 2, 3, 1).double().numpy()
    return codec.quantize_8bit(arr)


def real_codec_group(c: torch.Tensor, qf: int, backend=codec.DEFAULT_BACKEND) -> dict:
    """Run every compact image of the batch through the real codec.

    Returns the quantized inputs and decoded outputs as floats on [0, 1], plus
    the bit count of each stream.
    """
    q = _quantize_batch(c)
    decoded, bits = [], []
    for sample in q:
        dec, b = codec.roundtrip(codec.dequantize_8bit(sample), qf, backend)
        decoded.append(dec)
        bits.append(b)
    return {
        "input": codec.dequantize_8bit(q),
        "decoded": np.stack(decoded),
        "bits": np.asarray(bits, dtype=np.float64),
    }


def _build(cfg: TrainConfig, init: dict) -> _State:
    missing = set(KINDS) - set(init)
    if missing:
        raise ValueError(f"end-to-end training needs initial weights for {sorted(missing)}")
    modules = {}
    for kind in KINDS:
        w = init[kind]
        w.expect(kind, cfg.scale if kind in ("CRNet", "PPNet") else 1.0)
        modules[kind] = w.to_module()
    f, g, h, p = (modules[k] for k in KINDS)
    if cfg.alternating:
        optimizers = {"f": adam(f.parameters(), cfg.lr_finetune, cfg), "g": adam(g.parameters(), cfg.lr_finetune, cfg)}
    else:
        optimizers = {"fg": adam(list(f.parameters()) + list(g.parameters()), cfg.lr_finetune, cfg)}
    optimizers["h"] = adam(h.parameters(), cfg.lr_aux, cfg)
    optimizers["p"] = adam(p.parameters(), cfg.lr_aux, cfg)
    return _State(modules, optimizers, np.random.default_rng(cfg.seed))


def _checkpoint(state: _State) -> dict:
    return {
        "step": state.step,
        "ema": state.ema,
        "modules": {k: m.state_dict() for k, m in state.modules.items()},
        "optimizers": {k: o.state_dict() for k, o in state.optimizers.items()},
        "rng": state.rng.bit_generator.state,
        "torch_rng": torch.get_rng_state(),
        "rows": state.rows,
    }


def _restore(state: _State, ckpt: dict):
    for k, m in state.modules.items():
        m.load_state_dict(ckpt["modules"][k])
    for k, o in state.optimizers.items():
        o.load_state_dict(ckpt["optimizers"][k])
    state.rng.bit_generator.state = ckpt["rng"]
    torch.set_rng_state(ckpt["torch_rng"])
    state.step = ckpt["step"]
    state.ema = ckpt["ema"]
    state.rows = list(ckpt["rows"])


def checkpoint_path(run_dir, step: int) -> Path:
    return Path(run_dir) / "checkpoints" / f"step_{step:07d}.pt"


def latest_checkpoint(run_dir) -> Path | None:
    found = sorted((Path(run_dir) / "checkpoints").glob("step_*.pt"))
    return found[-1] if found else None


def _psnr_unit(mse: float) -> float:
    return 100.0 if mse <= 0 else 10 * math.log10(1.0 / mse)


def train_step(state: _State, x: torch.Tensor, cfg: TrainConfig, backend=codec.DEFAULT_BACKEND) -> dict:
    """One minibatch of the end-to-end loop; returns its log row."""
    f, g, h, p = (state.modules[k] for k in KINDS)
    step = state.step + 1
    out_size = tuple(x.shape[-2:])

    # (a) CRNet/PPNet update through frozen surrogates
    if cfg.alternating:
        opt = state.optimizers["f" if step % 2 else "g"]
        active = f if step % 2 else g
    else:
        opt = state.optimizers["fg"]
        active = None
    c = f(x)
    x_hat = g(frozen_call(h, c), out_size)
    try:
        total, parts = total_loss(x, c, x_hat, cfg, p)
    except NonFiniteLossError as exc:
        raise DivergenceError(f"non-finite loss at step {step}: {exc}") from exc
    if state.ema is not None and parts.total > cfg.divergence_factor * state.ema:
        raise DivergenceError(f"total loss {parts.total:.4g} exceeds {cfg.divergence_factor}x its running average {state.ema:.4g} at step {step}")
    assert parts.consistent(), "loss breakdown does not add up"
    for o in state.optimizers.values():
        o.zero_grad(set_to_none=True)
    total.backward()
    if any(q.grad is not None for m in (h, p) for q in m.parameters()):
        raise GradientLeakError("surrogate parameters received gradients in the CRNet/PPNet update")
    if active is not None:
        other = g if active is f else f
        for q in other.parameters():
            q.grad = None
    opt.step()
    state.ema = parts.total if state.ema is None else cfg.ema_decay * state.ema + (1 - cfg.ema_decay) * parts.total

    # (b) real codec on the 8-bit compact images of this minibatch
    group = real_codec_group(c, cfg.qf, backend)
    cin = to_nchw(group["input"])
    target = to_nchw(group["decoded"])
    hw = cin.shape[-2] * cin.shape[-1]
    bpp_compact = torch.as_tensor(group["bits"] / hw, dtype=torch.float32)

    # (c) surrogate refresh
    with torch.no_grad():
        acn_mse = float(torch.mean((h(cin) - target) ** 2))
    if cfg.iterative_update:
        for _ in range(cfg.aux_steps):
            loss_h = torch.mean((h(cin) - target) ** 2)
            state.optimizers["h"].zero_grad(set_to_none=True)
            loss_h.backward()
            state.optimizers["h"].step()
            loss_p = torch.mean((p(cin) - bpp_compact) ** 2)
            state.optimizers["p"].zero_grad(set_to_none=True)
            loss_p.backward()
            state.optimizers["p"].step()

    state.step = step
    return {
        "step": step,
        "rec": parts.rec,
        "bit": parts.bit,
        "reg": parts.reg,
        "total": parts.total,
        "real_bpp": float(group["bits"].mean()) / (out_size[0] * out_size[1]),
        "acn_psnr": _psnr_unit(acn_mse),
    }


def _write_log(path: Path, rows: list[dict]):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=LOG_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def read_loss_log(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{k: (int(v) if k == "step" else float(v)) for k, v in row.items()} for row in csv.DictReader(fh)]


def train_end_to_end(
    source,
    cfg: TrainConfig,
    init: dict[str, WeightSet],
    steps: int | None = None,
    run_dir=None,
    resume: bool | str | Path = False,
    callback: Callable | None = None,
    backend=codec.DEFAULT_BACKEND,
) -> TrainResult:
    """Train CRNet and PPNet jointly, refreshing ACN and BENet every minibatch.

    ``source.sample(rng, k)["original"]`` supplies training patches. With a
    ``run_dir`` the config, run header, loss log, periodic checkpoints and
    final weights are written there. ``resume`` is either ``True`` (latest
    checkpoint in ``run_dir``) or a checkpoint path; the resumed run replays
    the uninterrupted one exactly.
    """
    steps = cfg.steps_finetune if steps is None else steps
    state = _build(cfg, init)
    header = run_header(cfg, init, backend)

    if run_dir is not None:
        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        cfg.save(run_dir / "config.json")
        (run_dir / "run_header.json").write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    log.info("run header %s", json.dumps(header, sort_keys=True))

    if resume:
        path = latest_checkpoint(run_dir) if resume is True else Path(resume)
        if path is not None:
            _restore(state, torch.load(path, weights_only=False))
            log.info("resumed from %s at step %d", path, state.step)

    while state.step < steps:
        batch = source.sample(state.rng, cfg.batch_size)
        x = to_nchw(batch["original"])
        row = train_step(state, x, cfg, backend)
        state.rows.append(row)
        if callback is not None:
            callback(row, state.modules)
        if run_dir is not None and cfg.checkpoint_every and state.step % cfg.checkpoint_every == 0:
            ckpt = checkpoint_path(run_dir, state.step)
            ckpt.parent.mkdir(exist_ok=True)
            torch.save(_checkpoint(state), ckpt)
            _write_log(run_dir / "loss_log.csv", state.rows)

    weights = {k: WeightSet.from_module(m, state.step) for k, m in state.modules.items()}
    if run_dir is not None:
        _write_log(run_dir / "loss_log.csv", state.rows)
        for w in weights.values():
            save_weights(w, run_dir / "weights")
    return TrainResult(weights, state.rows, state.step, run_dir)


def lambda_grid_search(
    source,
    cfg: TrainConfig,
    init: dict[str, WeightSet],
    evaluate: Callable[[TrainResult], tuple[float, float]],
    steps: int | None = None,
    factors=(0.1, 1.0, 10.0),
) -> tuple[float, list[dict]]:
    """Coarse search over ``lambda_bit`` multiples.

    ``evaluate(result) -> (mse, bpp)`` measures a trained arm on held-out data.
    All arms are ranked by the same Lagrangian ``mse + lambda_ref * bpp`` with
    the configured ``lambda_bit`` as reference, so the comparison does not
    favour the arm's own weighting. Returns the best ``lambda_bit`` and a
    table of every arm.
    """
    base = cfg.lambda_bit
    table = []
    for factor in factors:
        arm_cfg = TrainConfig.from_dict({**cfg.to_dict(), "lambda_bit": base * factor})
        result = train_end_to_end(source, arm_cfg, init, steps=steps)
        mse, bpp = evaluate(result)
        table.append({"lambda_bit": base * factor, "mse": mse, "bpp": bpp, "cost": mse + base * bpp})
    best = min(table, key=lambda r: r["cost"])
    return best["lambda_bit"], table
