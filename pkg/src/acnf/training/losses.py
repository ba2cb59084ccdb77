"""Reconstruction, bit and regularization losses and their weighted total."""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch.func import functional_call

from ..networks import as_module, bicubic_resize


class NonFiniteLossError(FloatingPointError):
    pass


@dataclass(frozen=True)
class LossBreakdown:
    rec: float
    bit: float
    reg: float
    total: float
    lambda_bit: float = 0.0
    lambda_reg: float = 0.0

    def __post_init__(self):
        for name in ("rec", "bit", "reg", "total"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise NonFiniteLossError(f"loss component {name} = {v} is not finite")
            if v < 0:
                raise ValueError(f"loss component {name} = {v} must be non-negative")

    def consistent(self, rtol: float = 1e-6) -> bool:
        expected = self.rec + self.lambda_bit * self.bit + self.lambda_reg * self.reg
        return math.isclose(self.total, expected, rel_tol=rtol, abs_tol=1e-12)


def _check_same(a: torch.Tensor, b: torch.Tensor):
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")


def frozen_call(module: torch.nn.Module, x: torch.Tensor) -> torch.Tensor:
    """Run ``module`` with detached parameters: gradients reach ``x`` but never the weights."""
    params = {k: v.detach() for k, v in module.named_parameters()}
    buffers = {k: v for k, v in module.named_buffers()}
    return functional_call(module, {**params, **buffers}, (x,))


def rec_loss(x: torch.Tensor, x_hat: torch.Tensor) -> torch.Tensor:
    _check_same(x, x_hat)
    return torch.mean((x - x_hat) ** 2)


def bit_loss(c: torch.Tensor, benet) -> torch.Tensor:
    """Mean predicted bits-per-pixel of the compact batch; BENet weights stay frozen."""
    net = as_module(benet, "BENet")
    return frozen_call(net, c).mean()


def reg_loss(c: torch.Tensor, x: torch.Tensor, s: float) -> torch.Tensor:
    target = bicubic_resize(x, s) if s != 1.0 else x
    _check_same(c, target)
    return torch.mean((c - target) ** 2)


def total_loss(x, c, x_hat, cfg, benet) -> tuple[torch.Tensor, LossBreakdown]:
    """Weighted sum ``rec + lambda_bit * bit + lambda_reg * reg``.

    Returns the differentiable total and a :class:`LossBreakdown` of floats.
    Terms with zero weight are still reported.
    """
    rec = rec_loss(x, x_hat)
    bit = bit_loss(c, benet)
    reg = reg_loss(c, x, cfg.scale)
    total = rec + cfg.lambda_bit * bit + cfg.lambda_reg * reg
    parts = LossBreakdown(
        rec=float(rec.detach()),
        bit=float(bit.detach()),
        reg=float(reg.detach()),
        total=float(total.detach()),
        lambda_bit=cfg.lambda_bit,
        lambda_reg=cfg.lambda_reg,
    )
    return total, parts
