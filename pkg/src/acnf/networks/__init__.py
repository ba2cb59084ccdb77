"""Differentiable networks of the framework and the primitives they are built from.

The ``*_forward`` helpers take either a :class:`WeightSet` or an already built
module, check that it is the right kind of network and run it on an
(N, C, H, W) tensor.
"""

from __future__ import annotations

import torch

from .models import (
    ACN,
    BENet,
    CRNet,
    KINDS,
    PPNet,
    SCALES,
    NetworkSpec,
    SpecMismatchError,
    build_network,
    check_scale,
    compact_size,
)
from .resample import bicubic_resize, depth_to_space, resize, scaled_size, space_to_depth
from .weights import MissingWeightsError, WeightSet, checkpoint_name, find_weights, load_weights, save_weights


def as_module(w, kind: str, scale: float | None = None) -> torch.nn.Module:
    if isinstance(w, WeightSet):
        w.expect(kind, scale)
        return w.to_module()
    spec = getattr(w, "spec", None)
    if spec is None or spec.kind != kind:
        raise SpecMismatchError(f"expected a {kind} network, got {type(w).__name__}")
    if scale is not None and float(scale) != spec.scale:
        raise SpecMismatchError(f"network is for scale {spec.scale}, requested {scale}")
    return w


def _check_blocks(x: torch.Tensor):
    h, w = x.shape[-2:]
    if h % 8 or w % 8:
        raise ValueError(f"input dims {h}x{w} must be divisible by 8")


def crnet_forward(x: torch.Tensor, w, s: float) -> torch.Tensor:
    return as_module(w, "CRNet", check_scale(s))(x)


def ppnet_forward(y: torch.Tensor, w, s: float, out_size=None) -> torch.Tensor:
    return as_module(w, "PPNet", check_scale(s))(y, out_size)


def acn_forward(c: torch.Tensor, w) -> torch.Tensor:
    _check_blocks(c)
    return as_module(w, "ACN")(c)


def benet_forward(c: torch.Tensor, w) -> torch.Tensor:
    _check_blocks(c)
    return as_module(w, "BENet")(c)


__all__ = [
    "ACN",
    "BENet",
    "CRNet",
    "KINDS",
    "MissingWeightsError",
    "NetworkSpec",
    "PPNet",
    "SCALES",
    "SpecMismatchError",
    "WeightSet",
    "acn_forward",
    "as_module",
    "benet_forward",
    "bicubic_resize",
    "build_network",
    "check_scale",
    "checkpoint_name",
    "compact_size",
    "crnet_forward",
    "depth_to_space",
    "find_weights",
    "load_weights",
    "ppnet_forward",
    "resize",
    "save_weights",
    "scaled_size",
    "space_to_depth",
]
