"""Training configuration (JSON keys mirror the dataclass fields)."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from ..codec import check_quality
from ..networks import NetworkSpec, check_scale


class BadConfigError(ValueError):
    pass


def default_lambda_bit(qf: int) -> float:
    """Bit-loss weight per quality factor: 2e-4 at QF 10, 1e-4 at QF 20, 3e-5 at QF 40 and 80."""
    if qf < 15:
        return 2e-4
    if qf < 30:
        return 1e-4
    return 3e-5


@dataclass
class TrainConfig:
    qf: int = 10
    scale: float = 0.5
    lambda_bit: float | None = None
    lambda_reg: float = 0.1
    batch_size: int = 16
    patch_size: int = 128
    lr_pretrain: float = 1e-4
    lr_finetune: float = 5e-5
    lr_aux: float = 5e-6
    adam_beta1: float = 0.9
    adam_beta2: float = 0.99
    steps_acn: int = 20000
    steps_benet: int = 20000
    steps_crnet: int = 1000
    steps_ppnet: int = 20000
    steps_finetune: int = 20000
    seed: int = 0
    channels: int = 1
    # ablation switches
    iterative_update: bool = True
    alternating: bool = False
    aux_steps: int = 1
    # guards and bookkeeping
    divergence_factor: float = 10.0
    ema_decay: float = 0.99
    checkpoint_every: int = 0
    eval_every: int = 0
    # architecture overrides: {"CRNet": {"depth": 2, "width": 16}, ...}
    networks: dict = field(default_factory=dict)

    def __post_init__(self):
        try:
            check_quality(self.qf)
            self.scale = check_scale(self.scale)
        except ValueError as exc:
            raise BadConfigError(str(exc)) from exc
        if self.lambda_bit is None:
            self.lambda_bit = default_lambda_bit(self.qf)
        if self.lambda_bit < 0 or self.lambda_reg < 0:
            raise BadConfigError("loss weights must be non-negative")
        if self.batch_size < 1:
            raise BadConfigError("batch size must be positive")
        if self.patch_size % 8 or (self.patch_size * self.scale) % 8:
            raise BadConfigError(f"patch size {self.patch_size} and its compact size must be multiples of 8")
        unknown = set(self.networks) - {"CRNet", "PPNet", "ACN", "BENet"}
        if unknown:
            raise BadConfigError(f"unknown network kinds in overrides: {sorted(unknown)}")

    @property
    def compact_patch(self) -> int:
        return int(self.patch_size * self.scale)

    def spec(self, kind: str) -> NetworkSpec:
        scale = self.scale if kind in ("CRNet", "PPNet") else 1.0
        return NetworkSpec.default(kind, qf=self.qf, scale=scale, channels=self.channels, **self.networks.get(kind, {}))

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise BadConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "TrainConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise BadConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise BadConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def save(self, path):
        Path(path).write_text(self.to_json() + "\n")
