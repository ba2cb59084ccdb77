"""Dataset ingestion, patch extraction and caching of real-codec outputs."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import codec
from .networks.resample import bicubic_resize

log = logging.getLogger(__name__)

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".ppm", ".pgm")
BT601 = np.array([0.299, 0.587, 0.114])
TRANSFORMS = ("none", "bicubic_down")


class EmptyDatasetError(ValueError):
    pass


def to_luma(rgb: np.ndarray) -> np.ndarray:
    """Full-range ITU-R BT.601 luma of an H x W x 3 image, kept as H x W x 1."""
    return (np.asarray(rgb, dtype=np.float64) @ BT601)[:, :, None]


def load_image(path, layout: str = "luma") -> np.ndarray:
    """Read an image file as a float64 H x W x C array in [0, 1]."""
    with Image.open(path) as im:
        im = im.convert("RGB")
        arr = np.asarray(im, dtype=np.float64) / 255.0
    if layout == "luma":
        return to_luma(arr)
    if layout == "rgb":
        return arr
    raise ValueError(f"unknown channel layout {layout!r}")


def save_image(path, image: np.ndarray):
    samples = codec.quantize_8bit(codec.as_hwc(image))
    mode = "L" if samples.shape[2] == 1 else "RGB"
    Image.fromarray(samples[:, :, 0] if mode == "L" else samples, mode=mode).save(path)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# --------------------------------------------------------------------------
# patch store
# --------------------------------------------------------------------------


@dataclass
class PatchStore:
    images: list[dict]
    patches: list[tuple[int, int, int]]
    patch_size: int = 128
    seed: int = 0
    layout: str = "luma"
    split_ratio: float = 0.95
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.patch_size % 8:
            raise ValueError("patch size must be a multiple of 8")

    def manifest(self) -> dict:
        return {
            "patch_size": self.patch_size,
            "seed": self.seed,
            "layout": self.layout,
            "split_ratio": self.split_ratio,
            "images": self.images,
            "patches": [list(p) for p in self.patches],
        }

    def save(self, path):
        Path(path).write_text(json.dumps(self.manifest(), indent=1, sort_keys=True))

    @classmethod
    def load(cls, path) -> "PatchStore":
        m = json.loads(Path(path).read_text())
        return cls(
            images=m["images"],
            patches=[tuple(p) for p in m["patches"]],
            patch_size=m["patch_size"],
            seed=m["seed"],
            layout=m["layout"],
            split_ratio=m["split_ratio"],
        )

    def image(self, index: int) -> np.ndarray:
        if index not in self._cache:
            self._cache[index] = load_image(self.images[index]["path"], self.layout)
        return self._cache[index]

    def patch_ids(self, split: str | None = None) -> list[int]:
        if split is None:
            return list(range(len(self.patches)))
        return [i for i, (img, _, _) in enumerate(self.patches) if self.images[img]["split"] == split]

    def patch(self, pid: int) -> np.ndarray:
        img, y, x = self.patches[pid]
        p = self.patch_size
        return self.image(img)[y : y + p, x : x + p]

    def array(self, split: str | None = None) -> np.ndarray:
        """All patches of ``split`` stacked as (N, P, P, C)."""
        ids = self.patch_ids(split)
        if not ids:
            c = 1 if self.layout == "luma" else 3
            return np.zeros((0, self.patch_size, self.patch_size, c))
        return np.stack([self.patch(i) for i in ids])


def _list_images(directory: Path) -> list[Path]:
    return sorted(p for p in directory.rglob("*") if p.suffix.lower() in IMAGE_EXTENSIONS and p.is_file())


def ingest_dataset(
    directory,
    patch_size: int = 128,
    split_ratio: float = 0.95,
    seed: int = 0,
    stride: int | None = None,
    random_offset: bool = False,
    layout: str = "luma",
) -> PatchStore:
    """Tile every image in ``directory`` into ``patch_size`` patches.

    Images are assigned to train/val as a whole (never split across). With
    ``random_offset`` the tiling grid is shifted by a seeded, 8-aligned offset
    per image.
    """
    directory = Path(directory)
    if patch_size % 8:
        raise ValueError("patch size must be a multiple of 8")
    stride = stride or patch_size
    if stride % 8:
        raise ValueError("stride must be a multiple of 8")
    paths = _list_images(directory) if directory.is_dir() else []
    rng = np.random.default_rng(seed)

    images, sizes = [], []
    for path in paths:
        try:
            with Image.open(path) as im:
                w, h = im.size
        except (UnidentifiedImageError, OSError) as exc:
            warnings.warn(f"skipping unreadable image {path}: {exc}")
            continue
        if h < patch_size or w < patch_size:
            warnings.warn(f"skipping {path}: {w}x{h} is smaller than the {patch_size} patch size")
            continue
        images.append({"path": str(path), "sha256": sha256_file(path), "width": w, "height": h})
        sizes.append((h, w))
    if not images:
        raise EmptyDatasetError(f"no usable images of at least {patch_size}x{patch_size} in {directory}")

    order = rng.permutation(len(images))
    n_train = max(1, math.ceil(split_ratio * len(images))) if split_ratio > 0 else 0
    for rank, idx in enumerate(order):
        images[idx]["split"] = "train" if rank < n_train else "val"

    patches = []
    for idx, (h, w) in enumerate(sizes):
        oy = ox = 0
        if random_offset:
            oy = 8 * int(rng.integers(0, min(stride, h - patch_size + 8) // 8))
            ox = 8 * int(rng.integers(0, min(stride, w - patch_size + 8) // 8))
        for y in range(oy, h - patch_size + 1, stride):
            for x in range(ox, w - patch_size + 1, stride):
                patches.append((idx, y, x))
    return PatchStore(images, patches, patch_size, seed, layout, split_ratio)


# --------------------------------------------------------------------------
# codec cache
# --------------------------------------------------------------------------

BLOB_HEADER = struct.Struct("<4sHHH")
BLOB_MAGIC = b"ACC1"


def transform_patch(x: np.ndarray, transform: str, scale: float) -> np.ndarray:
    if transform == "none":
        return x
    if transform == "bicubic_down":
        return bicubic_resize(x, scale)
    raise ValueError(f"unknown transform {transform!r}")


def write_blob(path, samples: np.ndarray):
    h, w, c = samples.shape
    with open(path, "wb") as f:
        f.write(BLOB_HEADER.pack(BLOB_MAGIC, h, w, c))
        f.write(np.ascontiguousarray(samples, dtype=np.uint8).tobytes())


def read_blob(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    magic, h, w, c = BLOB_HEADER.unpack_from(raw)
    if magic != BLOB_MAGIC:
        raise ValueError(f"{path} is not a cache blob")
    return np.frombuffer(raw, dtype=np.uint8, offset=BLOB_HEADER.size).reshape(h, w, c).copy()


@dataclass
class CodecCache:
    """Real-codec outputs for every patch of a store under one (qf, scale, transform).

    ``inputs`` are the codec inputs ``T(x)`` (unquantized floats), ``decoded``
    the 8-bit decoded images ``Phi(T(x))`` and ``bits`` the stream sizes
    ``phi(T(x))``.
    """

    store: PatchStore
    qf: int
    scale: float
    transform: str
    patch_ids: list[int]
    inputs: np.ndarray
    decoded: np.ndarray
    bits: np.ndarray
    originals: np.ndarray
    backend: str = ""

    def __len__(self):
        return len(self.patch_ids)

    @property
    def bpp(self) -> np.ndarray:
        h, w = self.inputs.shape[1:3]
        return self.bits / float(h * w)

    def decoded_float(self) -> np.ndarray:
        return codec.dequantize_8bit(self.decoded)

    def sample(self, rng: np.random.Generator, k: int) -> dict:
        """Random minibatch of ``k`` entries (with replacement)."""
        idx = rng.integers(0, len(self), size=k)
        return {
            "original": self.originals[idx],
            "input": self.inputs[idx],
            "decoded": codec.dequantize_8bit(self.decoded[idx]),
            "bpp": self.bpp[idx],
        }

    def key(self, pid: int) -> str:
        return f"{pid}_qf{self.qf}_s{self.scale:g}_{self.transform}"

    def save(self, root):
        """Write one blob per entry plus ``index.json``."""
        root = Path(root)
        root.mkdir(parents=True, exist_ok=True)
        index = {"qf": self.qf, "scale": self.scale, "transform": self.transform, "backend": self.backend, "entries": []}
        for i, pid in enumerate(self.patch_ids):
            name = self.key(pid) + ".bin"
            write_blob(root / name, self.decoded[i])
            index["entries"].append(
                {
                    "patch_id": pid,
                    "blob": name,
                    "bit_count": int(self.bits[i]),
                    "decoded_sha256": hashlib.sha256(self.decoded[i].tobytes()).hexdigest(),
                }
            )
        (root / "index.json").write_text(json.dumps(index, indent=1, sort_keys=True))

    def verify(self, fraction: float = 0.01, seed: int = 0, backend: codec.CodecBackend = codec.DEFAULT_BACKEND) -> int:
        """Re-encode a random sample of entries; raise on any mismatch. Returns the number checked."""
        rng = np.random.default_rng(seed)
        n = max(1, int(round(fraction * len(self))))
        for i in sorted(rng.choice(len(self), size=min(n, len(self)), replace=False)):
            art = backend.encode(self.inputs[i], self.qf)
            dec = codec.quantize_8bit(backend.decode(art))
            if art.bit_count != self.bits[i] or not np.array_equal(dec, self.decoded[i]):
                raise ValueError(f"cache entry for patch {self.patch_ids[i]} does not reproduce")
        return n


def build_codec_cache(
    store: PatchStore,
    qf: int,
    scale: float = 1.0,
    transform: str = "none",
    split: str | None = "train",
    backend: codec.CodecBackend = codec.DEFAULT_BACKEND,
    root=None,
) -> CodecCache:
    """Run the real codec on ``T(x)`` for every patch of ``split``.

    With ``root`` given, an existing cache directory is reused after its stored
    bit counts and hashes are checked against a fresh encode of every entry.
    """
    if transform not in TRANSFORMS:
        raise ValueError(f"transform must be one of {TRANSFORMS}")
    qf = codec.check_quality(qf)
    ids = store.patch_ids(split)
    if not ids:
        raise EmptyDatasetError(f"patch store has no patches in split {split!r}")
    originals, inputs, decoded, bits = [], [], [], []
    for pid in ids:
        x = store.patch(pid)
        t = transform_patch(x, transform, scale)
        try:
            art = backend.encode(t, qf)
            dec = backend.decode(art)
        except codec.CodecError as exc:
            raise codec.CodecError(f"patch {pid}: {exc}") from exc
        originals.append(x)
        inputs.append(t)
        decoded.append(codec.quantize_8bit(dec))
        bits.append(art.bit_count)
    cache = CodecCache(
        store,
        qf,
        float(scale),
        transform,
        ids,
        np.stack(inputs),
        np.stack(decoded),
        np.asarray(bits, dtype=np.int64),
        np.stack(originals),
        backend.identity(),
    )
    if root is not None:
        root = Path(root)
        if (root / "index.json").is_file():
            index = json.loads((root / "index.json").read_text())
            stored = {e["patch_id"]: e for e in index["entries"]}
            for i, pid in enumerate(ids):
                e = stored.get(pid)
                digest = hashlib.sha256(cache.decoded[i].tobytes()).hexdigest()
                if e is None or e["bit_count"] != cache.bits[i] or e["decoded_sha256"] != digest:
                    raise ValueError(f"cache at {root} is stale for patch {pid}")
        else:
            cache.save(root)
    return cache


# --------------------------------------------------------------------------
# bundled sample photographs
# --------------------------------------------------------------------------

# natural photographs shipped inside installed packages; used for desk-scale runs
_BUNDLED = {
    "skimage": [
        "astronaut.png", "brick.png", "camera.png", "cell.png", "chelsea.png", "clock_motion.png",
        "coffee.png", "coins.png", "grass.png", "gravel.png", "hubble_deep_field.jpg", "ihc.png",
        "moon.png", "motorcycle_left.png", "retina.jpg", "rocket.jpg",
    ],
    "sklearn": ["china.jpg", "flower.jpg"],
    "matplotlib": ["grace_hopper.jpg"],
}
HELDOUT_SOURCES = ("camera", "coffee", "chelsea", "china", "moon", "grace_hopper", "coins")


def bundled_photographs() -> dict[str, Path]:
    """Map of name -> path for sample photographs found in installed packages."""
    found = {}
    roots = {}
    try:
        import skimage

        roots["skimage"] = Path(skimage.__file__).parent / "data"
    except ImportError:
        pass
    try:
        import sklearn

        roots["sklearn"] = Path(sklearn.__file__).parent / "datasets" / "images"
    except ImportError:
        pass
    try:
        import matplotlib

        roots["matplotlib"] = Path(matplotlib.get_data_path()) / "sample_data"
    except ImportError:
        pass
    for pkg, names in _BUNDLED.items():
        if pkg not in roots:
            continue
        for name in names:
            path = roots[pkg] / name
            if path.is_file():
                found[Path(name).stem] = path
    return found


def write_tile_corpus(
    root,
    tile: int = 128,
    heldout=HELDOUT_SOURCES,
    layout: str = "luma",
    max_per_source: int | None = None,
) -> tuple[Path, Path]:
    """Cut the bundled photographs into ``tile``-sized images under ``root/train`` and ``root/heldout``.

    Whole source photographs go to one side only, so tiles of a held-out
    photograph never appear in training. ``max_per_source`` keeps an evenly
    spaced subset of each photograph's tiles so large sources do not dominate.
    """
    root = Path(root)
    train_dir, held_dir = root / "train", root / "heldout"
    train_dir.mkdir(parents=True, exist_ok=True)
    held_dir.mkdir(parents=True, exist_ok=True)
    sources = bundled_photographs()
    if not sources:
        raise EmptyDatasetError("no bundled sample photographs available")
    for name, path in sorted(sources.items()):
        img = load_image(path, layout)
        out = held_dir if name in heldout else train_dir
        h, w = img.shape[:2]
        coords = [(y, x) for y in range(0, h - tile + 1, tile) for x in range(0, w - tile + 1, tile)]
        if max_per_source is not None and len(coords) > max_per_source:
            keep = np.linspace(0, len(coords) - 1, max_per_source).round().astype(int)
            coords = [coords[i] for i in keep]
        for y, x in coords:
            save_image(out / f"{name}_{y:04d}_{x:04d}.png", img[y : y + tile, x : x + tile])
    return train_dir, held_dir


# --------------------------------------------------------------------------
# minibatch sources
# --------------------------------------------------------------------------


@dataclass
class RandomCropSource:
    """Codec training pairs generated on the fly from random crops of whole images.

    Crop positions are drawn at any pixel offset, so every draw presents new
    8x8 block contents to the codec; the real codec runs on each crop.
    """

    images: list[np.ndarray]
    patch_size: int
    qf: int
    scale: float = 1.0
    transform: str = "none"
    backend: codec.CodecBackend = codec.DEFAULT_BACKEND

    def __post_init__(self):
        codec.check_quality(self.qf)
        self.images = [img for img in self.images if min(img.shape[:2]) >= self.patch_size]
        if not self.images:
            raise EmptyDatasetError(f"no image is at least {self.patch_size}x{self.patch_size}")

    @classmethod
    def from_store(cls, store: PatchStore, split: str = "train", **kw) -> "RandomCropSource":
        idx = sorted({img for img, _, _ in (store.patches[i] for i in store.patch_ids(split))})
        return cls([store.image(i) for i in idx], store.patch_size, **kw)

    def crop(self, rng: np.random.Generator) -> np.ndarray:
        img = self.images[rng.integers(0, len(self.images))]
        h, w = img.shape[:2]
        p = self.patch_size
        y, x = rng.integers(0, h - p + 1), rng.integers(0, w - p + 1)
        return img[y : y + p, x : x + p]

    def sample(self, rng: np.random.Generator, k: int) -> dict:
        originals, inputs, decoded, bpp = [], [], [], []
        for _ in range(k):
            x = self.crop(rng)
            t = transform_patch(x, self.transform, self.scale)
            art = self.backend.encode(t, self.qf)
            originals.append(x)
            inputs.append(t)
            decoded.append(self.backend.decode(art))
            bpp.append(art.bit_count / (t.shape[0] * t.shape[1]))
        return {
            "original": np.stack(originals),
            "input": np.stack(inputs),
            "decoded": np.stack(decoded),
            "bpp": np.asarray(bpp),
        }
