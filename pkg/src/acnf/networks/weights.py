"""Weight sets and their on-disk checkpoint layout.

A checkpoint is a directory ``<kind>_qf<Q>_s<scale>/`` holding

* ``manifest.json`` -- spec fields, training step, and for every parameter its
  name, shape, byte offset and byte length inside ``params.bin``;
* ``params.bin``    -- all parameters concatenated as little-endian float32,
  row-major, in manifest order.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .models import NetworkSpec, SpecMismatchError, build_network

MANIFEST = "manifest.json"
PARAMS = "params.bin"
FORMAT_VERSION = 1


class MissingWeightsError(FileNotFoundError):
    pass


@dataclass
class WeightSet:
    spec: NetworkSpec
    parameters: dict[str, np.ndarray]
    training_step: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, value in self.parameters.items():
            if not np.all(np.isfinite(value)):
                raise ValueError(f"parameter {name} contains non-finite values")

    @classmethod
    def from_module(cls, module: torch.nn.Module, training_step: int = 0) -> "WeightSet":
        params = {k: v.detach().cpu().numpy().copy() for k, v in module.state_dict().items()}
        return cls(module.spec, params, training_step)

    @classmethod
    def initial(cls, spec: NetworkSpec, seed: int = 0) -> "WeightSet":
        return cls.from_module(build_network(spec, seed=seed))

    def to_module(self, dtype=torch.float32) -> torch.nn.Module:
        net = build_network(self.spec)
        state = {k: torch.as_tensor(v) for k, v in self.parameters.items()}
        net.load_state_dict(state)
        return net.to(dtype)

    def expect(self, kind: str, scale: float | None = None):
        if self.spec.kind != kind:
            raise SpecMismatchError(f"expected {kind} weights, got {self.spec.kind}")
        if scale is not None and float(scale) != self.spec.scale:
            raise SpecMismatchError(f"weights are for scale {self.spec.scale}, requested {scale}")
        return self

    @property
    def n_parameters(self) -> int:
        return int(sum(v.size for v in self.parameters.values()))

    def dirname(self) -> str:
        return checkpoint_name(self.spec)

    def manifest(self) -> dict:
        entries, offset = [], 0
        for name, value in self.parameters.items():
            nbytes = int(value.size) * 4
            entries.append({"name": name, "shape": list(value.shape), "offset": offset, "nbytes": nbytes})
            offset += nbytes
        return {
            "format_version": FORMAT_VERSION,
            "dtype": "<f4",
            "order": "C",
            "spec": self.spec.to_dict(),
            "training_step": int(self.training_step),
            "parameters": entries,
            "extra": self.extra,
        }

    def model_id(self) -> bytes:
        """8-byte digest of the manifest and parameter bytes."""
        h = hashlib.sha256(json.dumps(self.manifest(), sort_keys=True).encode())
        for value in self.parameters.values():
            h.update(np.ascontiguousarray(value, dtype="<f4").tobytes())
        return h.digest()[:8]


def checkpoint_name(spec: NetworkSpec) -> str:
    return f"{spec.kind}_qf{spec.qf_tag}_s{spec.scale:g}"


def save_weights(ws: WeightSet, root: str | os.PathLike) -> Path:
    """Write ``ws`` under ``root/<kind>_qf<Q>_s<scale>/`` and return that directory."""
    out = Path(root) / ws.dirname()
    out.mkdir(parents=True, exist_ok=True)
    with open(out / PARAMS, "wb") as f:
        for value in ws.parameters.values():
            f.write(np.ascontiguousarray(value, dtype="<f4").tobytes(order="C"))
    with open(out / MANIFEST, "w") as f:
        json.dump(ws.manifest(), f, indent=2, sort_keys=True)
    return out


def load_weights(path: str | os.PathLike) -> WeightSet:
    path = Path(path)
    if not (path / MANIFEST).is_file():
        raise MissingWeightsError(f"no weight manifest in {path}")
    manifest = json.loads((path / MANIFEST).read_text())
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format {manifest.get('format_version')}")
    blob = (path / PARAMS).read_bytes()
    params = {}
    for entry in manifest["parameters"]:
        chunk = blob[entry["offset"] : entry["offset"] + entry["nbytes"]]
        params[entry["name"]] = np.frombuffer(chunk, dtype="<f4").reshape(entry["shape"]).copy()
    return WeightSet(
        NetworkSpec.from_dict(manifest["spec"]),
        params,
        manifest["training_step"],
        manifest.get("extra", {}),
    )


def find_weights(root: str | os.PathLike, kind: str, qf: int, scale: float, nearest: bool = False) -> WeightSet:
    """Load ``root/<kind>_qf<qf>_s<scale>``.

    With ``nearest`` a missing exact match falls back to the weights of the
    same kind and scale trained at the closest quality factor.
    """
    root = Path(root)
    suffix = f"_s{float(scale):g}"
    exact = root / f"{kind}_qf{qf}{suffix}"
    if exact.is_dir() or not nearest:
        return load_weights(exact)
    tags = []
    for d in root.glob(f"{kind}_qf*{suffix}") if root.is_dir() else []:
        tag = d.name[len(kind) + 3 : -len(suffix)]
        if tag.isdigit() and (d / MANIFEST).is_file():
            tags.append(int(tag))
    if not tags:
        raise MissingWeightsError(f"no {kind} weights for scale {scale:g} under {root}")
    best = min(tags, key=lambda t: (abs(t - qf), t))
    return load_weights(root / f"{kind}_qf{best}{suffix}")
