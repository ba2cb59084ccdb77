"""Pretraining of the codec surrogates (ACN, BENet) and initialisation of CRNet/PPNet."""

from __future__ import annotations

import logging
import math
from typing import Callable

import numpy as np
import torch

from ..data import EmptyDatasetError
from ..networks import WeightSet, bicubic_resize, build_network
from .config import TrainConfig

log = logging.getLogger(__name__)


def to_nchw(a: np.ndarray, dtype=torch.float32) -> torch.Tensor:
    return torch.as_tensor(np.asarray(a), dtype=dtype).permute(0, 3, 1, 2).contiguous()


def adam(params, lr: float, cfg: TrainConfig) -> torch.optim.Adam:
    return torch.optim.Adam(params, lr=lr, betas=(cfg.adam_beta1, cfg.adam_beta2))


def _check_dataset(dataset):
    if dataset is None or (hasattr(dataset, "__len__") and len(dataset) == 0):
        raise EmptyDatasetError("training dataset is empty")


def _initial_module(kind: str, cfg: TrainConfig, init) -> torch.nn.Module:
    if init is None:
        return build_network(cfg.spec(kind), seed=cfg.seed)
    if isinstance(init, WeightSet):
        return init.expect(kind).to_module()
    return init


def fit(
    net: torch.nn.Module,
    dataset,
    loss_fn: Callable,
    steps: int,
    lr: float,
    cfg: TrainConfig,
    seed: int,
    callback: Callable | None = None,
    log_every: int = 0,
    cosine: bool = False,
) -> list[float]:
    """Generic Adam loop: ``loss_fn(net, batch)`` on ``dataset.sample(rng, batch_size)``.

    With ``cosine`` the learning rate decays to zero over ``steps``.
    """
    rng = np.random.default_rng(seed)
    opt = adam(net.parameters(), lr, cfg)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, steps) if cosine and steps > 0 else None
    losses = []
    for step in range(1, steps + 1):
        batch = dataset.sample(rng, cfg.batch_size)
        loss = loss_fn(net, batch)
        if not torch.isfinite(loss):
            raise FloatingPointError(f"non-finite loss at step {step}")
        opt.zero_grad()
        loss.backward()
        opt.step()
        if sched is not None:
            sched.step()
        losses.append(loss.item())
        if log_every and step % log_every == 0:
            log.info("%s step %d loss %.6g", net.spec.kind, step, losses[-1])
        if callback is not None:
            callback(step, net)
    return losses


def acn_objective(net, batch) -> torch.Tensor:
    return torch.mean((net(to_nchw(batch["input"])) - to_nchw(batch["decoded"])) ** 2)


def benet_objective(net, batch) -> torch.Tensor:
    target = torch.as_tensor(batch["bpp"], dtype=torch.float32)
    return torch.mean((net(to_nchw(batch["input"])) - target) ** 2)


def pretrain_acn(dataset, cfg: TrainConfig, steps: int | None = None, init=None, lr: float | None = None, **kw) -> WeightSet:
    """Fit the ACN to the real codec: minimise ||h(x) - Phi(x)||^2 over (input, decoded) pairs."""
    _check_dataset(dataset)
    net = _initial_module("ACN", cfg, init)
    steps = cfg.steps_acn if steps is None else steps
    fit(net, dataset, acn_objective, steps, lr or cfg.lr_pretrain, cfg, cfg.seed + 1, **kw)
    return WeightSet.from_module(net, steps)


def pretrain_benet(dataset, cfg: TrainConfig, steps: int | None = None, init=None, lr: float | None = None, **kw) -> WeightSet:
    """Fit BENet to real stream sizes: minimise (p(x) - bpp(x))^2."""
    _check_dataset(dataset)
    net = _initial_module("BENet", cfg, init)
    steps = cfg.steps_benet if steps is None else steps
    fit(net, dataset, benet_objective, steps, lr or cfg.lr_pretrain, cfg, cfg.seed + 2, **kw)
    return WeightSet.from_module(net, steps)


def pretrain_crnet(dataset, cfg: TrainConfig, steps: int | None = None, init=None, lr: float | None = None, **kw) -> WeightSet:
    """Initialise CRNet towards bicubic downscaling: minimise ||f(x) - F_s(x)||^2.

    ``dataset`` only needs to provide ``"original"`` patches.
    """
    _check_dataset(dataset)
    net = _initial_module("CRNet", cfg, init)
    s = cfg.scale

    def objective(net, batch):
        x = to_nchw(batch["original"])
        return torch.mean((net(x) - bicubic_resize(x, s)) ** 2)

    steps = cfg.steps_crnet if steps is None else steps
    fit(net, dataset, objective, steps, lr or cfg.lr_pretrain, cfg, cfg.seed + 3, **kw)
    return WeightSet.from_module(net, steps)


def pretrain_ppnet(dataset, cfg: TrainConfig, steps: int | None = None, init=None, lr: float | None = None, **kw) -> WeightSet:
    """Initialise PPNet to restore codec-degraded bicubic-downscaled patches: ||g(Phi(F_s(x))) - x||^2."""
    _check_dataset(dataset)
    net = _initial_module("PPNet", cfg, init)

    def objective(net, batch):
        x = to_nchw(batch["original"])
        y = to_nchw(batch["decoded"])
        return torch.mean((net(y, tuple(x.shape[-2:])) - x) ** 2)

    steps = cfg.steps_ppnet if steps is None else steps
    fit(net, dataset, objective, steps, lr or cfg.lr_pretrain, cfg, cfg.seed + 4, **kw)
    return WeightSet.from_module(net, steps)


# --------------------------------------------------------------------------
# held-out measurements
# --------------------------------------------------------------------------


def _psnr_unit(a: torch.Tensor, b: torch.Tensor) -> float:
    err = float(torch.mean((a - b) ** 2))
    return 100.0 if err == 0 else 10 * math.log10(1.0 / err)


@torch.no_grad()
def acn_imitation_psnr(acn, inputs: np.ndarray, decoded: np.ndarray, chunk: int = 64) -> tuple[float, float]:
    """(PSNR(h(x), Phi(x)), PSNR(x, Phi(x))) over a stack of patches, on the [0, 1] scale."""
    net = acn.to_module() if isinstance(acn, WeightSet) else acn
    outs = [net(to_nchw(inputs[i : i + chunk])) for i in range(0, len(inputs), chunk)]
    h = torch.cat(outs)
    target = to_nchw(decoded)
    return _psnr_unit(h, target), _psnr_unit(to_nchw(inputs), target)


@torch.no_grad()
def benet_relative_error(benet, inputs: np.ndarray, bpp: np.ndarray, chunk: int = 64) -> np.ndarray:
    """Per-patch |p(x) - bpp| / bpp."""
    net = benet.to_module() if isinstance(benet, WeightSet) else benet
    pred = torch.cat([net(to_nchw(inputs[i : i + chunk])) for i in range(0, len(inputs), chunk)]).numpy()
    return np.abs(pred - bpp) / bpp
