"""CRNet, PPNet, JPEG-imitating ACN and BENet as torch modules.

Every network is built from a :class:`NetworkSpec` and has a residual output
head initialised to zero, so an untrained network reduces to its skip path:

* CRNet -> bicubic downscale of the input
* PPNet -> bicubic upscale of the decoded compact image
* ACN   -> identity
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import torch
import torch.nn.functional as F
from torch import nn

from .resample import bicubic_resize, depth_to_space, resize, scaled_size, space_to_depth

SCALES = (0.5, 0.75, 1.0)
KINDS = ("CRNet", "PPNet", "ACN", "BENet")


class SpecMismatchError(ValueError):
    pass


def check_scale(scale: float) -> float:
    scale = float(scale)
    if scale not in SCALES:
        raise ValueError(f"scale must be one of {SCALES}, got {scale}")
    return scale


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture hyperparameters of one network at one operating point.

    ``depth`` is the residual-block count for CRNet/PPNet and the number of
    1x1 convolution layers for ACN (N) and BENet (M).
    """

    kind: str
    depth: int
    width: int
    channels: int = 1
    block_size: int = 8
    scale: float = 1.0
    qf_tag: int = 10

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown network kind {self.kind!r}")
        check_scale(self.scale)
        if self.block_size != 8 and self.kind in ("ACN", "BENet"):
            raise ValueError("ACN/BENet operate on 8x8 blocks")
        if self.depth < 1 or self.width < 1:
            raise ValueError("depth and width must be positive")

    @classmethod
    def default(cls, kind: str, qf: int = 10, scale: float = 1.0, channels: int = 1, **overrides):
        base = {
            "CRNet": dict(depth=8, width=64),
            "PPNet": dict(depth=16, width=64),
            "ACN": dict(depth=12, width=256),
            # 10 layers at width 512 lands close to the ~2.1M parameters quoted for BENet
            "BENet": dict(depth=10, width=512),
        }[kind]
        base.update(overrides)
        return cls(kind=kind, qf_tag=qf, scale=scale, channels=channels, **base)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(**d)

    def with_(self, **kw) -> "NetworkSpec":
        return replace(self, **kw)


def conv3x3(cin: int, cout: int) -> nn.Conv2d:
    return nn.Conv2d(cin, cout, 3, padding=1, padding_mode="replicate")


def zero_(layer: nn.Conv2d) -> nn.Conv2d:
    nn.init.zeros_(layer.weight)
    nn.init.zeros_(layer.bias)
    return layer


class ResBlock(nn.Module):
    """EDSR residual block: conv-ReLU-conv plus identity, no batch norm."""

    def __init__(self, width: int, res_scale: float = 1.0):
        super().__init__()
        self.conv1 = conv3x3(width, width)
        self.conv2 = conv3x3(width, width)
        self.res_scale = res_scale

    def forward(self, x):
        return x + self.res_scale * self.conv2(F.relu(self.conv1(x)))


class CRNet(nn.Module):
    """Learned downscaler: bicubic skip path plus a residual feature branch.

    Features are computed at input resolution and bicubically resampled onto
    the compact grid before the (zero-initialised) output convolution.
    """

    def __init__(self, spec: NetworkSpec):
        super().__init__()
        self.spec = spec
        c, w = spec.channels, spec.width
        self.head = conv3x3(c, w)
        self.body = nn.Sequential(*[ResBlock(w) for _ in range(spec.depth)])
        self.tail = zero_(conv3x3(w, c))

    def forward(self, x):
        s = self.spec.scale
        skip = bicubic_resize(x, s)
        feat = self.body(self.head(x))
        if s != 1.0:
            feat = resize(feat, s)
        return skip + self.tail(feat)


class PPNet(nn.Module):
    """EDSR-style restoration network returning the image at original resolution.

    For ``scale == 0.5`` the body runs on the compact grid and a sub-pixel
    layer doubles the resolution; for 0.75 and 1.0 the input is first resized
    to the target grid and the body refines it.
    """

    def __init__(self, spec: NetworkSpec):
        super().__init__()
        self.spec = spec
        c, w = spec.channels, spec.width
        self.head = conv3x3(c, w)
        self.body = nn.Sequential(*[ResBlock(w) for _ in range(spec.depth)], conv3x3(w, w))
        if spec.scale == 0.5:
            self.upsample = nn.Sequential(conv3x3(w, 4 * w), nn.PixelShuffle(2))
        else:
            self.upsample = nn.Identity()
        self.tail = zero_(conv3x3(w, c))

    def output_size(self, h: int, w: int):
        s = self.spec.scale
        return round(h / s), round(w / s)

    def forward(self, y, out_size=None):
        s = self.spec.scale
        if out_size is None:
            out_size = self.output_size(*y.shape[-2:])
        out_size = tuple(int(v) for v in out_size)
        if s == 0.5:
            skip = resize(y, 1 / s, out_size)
            feat = self.head(y)
            feat = self.upsample(feat + self.body(feat))
            res = self.tail(feat)[..., : out_size[0], : out_size[1]]
            if res.shape[-2:] != out_size:
                raise SpecMismatchError(f"compact size {tuple(y.shape[-2:])} cannot reach {out_size} at scale 0.5")
            return skip + res
        skip = resize(y, 1 / s, out_size) if s != 1.0 else y
        feat = self.head(skip)
        return skip + self.tail(feat + self.body(feat))


class ACN(nn.Module):
    """JPEG imitation network working independently on every 8x8 block.

    After the 8x8 space-to-depth rearrangement every block is one spatial
    position, so the 1x1 convolutions act as a per-block MLP; skip connections
    wrap every pair of hidden layers and the whole stack.
    """

    def __init__(self, spec: NetworkSpec):
        super().__init__()
        self.spec = spec
        cin = spec.channels * spec.block_size**2
        w, n = spec.width, spec.depth
        if n < 2:
            raise ValueError("ACN needs at least an input and an output layer")
        self.inp = nn.Conv2d(cin, w, 1)
        hidden = n - 2
        self.pairs = nn.ModuleList(
            nn.ModuleList([nn.Conv2d(w, w, 1), nn.Conv2d(w, w, 1)]) for _ in range(hidden // 2)
        )
        self.extra = nn.Conv2d(w, w, 1) if hidden % 2 else None
        self.out = zero_(nn.Conv2d(w, cin, 1))

    def forward(self, x):
        b = self.spec.block_size
        z = space_to_depth(x, b)
        h = F.relu(self.inp(z))
        for conv_a, conv_b in self.pairs:
            h = h + conv_b(F.relu(conv_a(h)))
        if self.extra is not None:
            h = F.relu(self.extra(h))
        return depth_to_space(z + self.out(F.relu(h)), b)


class BENet(nn.Module):
    """Bits-per-pixel regressor: 8x8 space-to-depth, M 1x1 convs, global average pool, softplus."""

    def __init__(self, spec: NetworkSpec):
        super().__init__()
        self.spec = spec
        cin = spec.channels * spec.block_size**2
        widths = [cin] + [spec.width] * (spec.depth - 1) + [1]
        self.layers = nn.ModuleList(nn.Conv2d(a, b, 1) for a, b in zip(widths[:-1], widths[1:]))

    def forward(self, x):
        h = space_to_depth(x, self.spec.block_size)
        for i, layer in enumerate(self.layers):
            h = layer(h)
            if i < len(self.layers) - 1:
                h = F.relu(h)
        return F.softplus(h.mean(dim=(1, 2, 3)))


_REGISTRY = {"CRNet": CRNet, "PPNet": PPNet, "ACN": ACN, "BENet": BENet}


def build_network(spec: NetworkSpec, seed: int | None = None) -> nn.Module:
    if seed is not None:
        with torch.random.fork_rng():
            torch.manual_seed(seed)
            return _REGISTRY[spec.kind](spec)
    return _REGISTRY[spec.kind](spec)


def compact_size(h: int, w: int, scale: float):
    return scaled_size(h, scale), scaled_size(w, scale)
