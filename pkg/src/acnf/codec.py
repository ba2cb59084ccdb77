"""Real JPEG codec wrapped as the non-differentiable reconstruction and bit-count functions.

All codec I/O happens in the 8-bit domain: float images in [0, 1] are clamped,
scaled by 255 and rounded before encoding, and decoded samples are divided by
255 on the way out.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
from PIL import Image, features

import PIL

SOI = b"\xff\xd8"
EOI = b"\xff\xd9"
MIN_SIDE = 8


class CodecError(Exception):
    """Base class for codec failures."""


class DimensionTooSmallError(CodecError, ValueError):
    pass


class QualityOutOfRangeError(CodecError, ValueError):
    pass


class CorruptStreamError(CodecError, ValueError):
    pass


def check_quality(qf: int) -> int:
    if isinstance(qf, bool) or int(qf) != qf or not 1 <= int(qf) <= 100:
        raise QualityOutOfRangeError(f"quality factor must be an integer in [1, 100], got {qf!r}")
    return int(qf)


def as_hwc(image) -> np.ndarray:
    """Return ``image`` as a float64 H x W x C array (C in {1, 3})."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[2] not in (1, 3):
        raise ValueError(f"expected an H x W or H x W x C image with C in (1, 3), got shape {arr.shape}")
    return arr


def quantize_8bit(image) -> np.ndarray:
    """Map a [0, 1] image onto uint8 samples: ``clamp(round(255 * v), 0, 255)``."""
    arr = np.asarray(image, dtype=np.float64)
    return np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)


def dequantize_8bit(samples: np.ndarray) -> np.ndarray:
    return samples.astype(np.float64) / 255.0


@dataclass(frozen=True)
class EncodedArtifact:
    payload: bytes
    qf: int
    width: int
    height: int
    channels: int = 1

    def __post_init__(self):
        check_quality(self.qf)
        if len(self.payload) < 4:
            raise CorruptStreamError("payload too short to be a JPEG stream")

    @property
    def bit_count(self) -> int:
        return 8 * len(self.payload)


class CodecBackend(Protocol):
    """A deterministic image codec: ``decode(encode(x, q))`` keeps the dimensions of ``x``."""

    name: str
    quality_range: tuple[int, int]

    def identity(self) -> str: ...

    def encode(self, image, qf: int) -> EncodedArtifact: ...

    def decode(self, artifact: EncodedArtifact) -> np.ndarray: ...


@dataclass(frozen=True)
class JPEGBackend:
    """Baseline (sequential, Huffman-coded) JPEG via Pillow's libjpeg-turbo build.

    Color images are written as YCbCr 4:2:0, single-channel images as grayscale.
    Standard Huffman tables are used (no per-image optimisation) so that the bit
    count depends only on the quantized coefficients.
    """

    name: str = "jpeg"
    quality_range: tuple[int, int] = (1, 100)
    options: dict = field(default_factory=lambda: {"optimize": False, "progressive": False})

    def identity(self) -> str:
        return f"pillow-{PIL.__version__}/libjpeg-turbo-{features.version('libjpeg_turbo')}"

    def encode(self, image, qf: int) -> EncodedArtifact:
        qf = check_quality(qf)
        arr = as_hwc(image)
        h, w, c = arr.shape
        if h < MIN_SIDE or w < MIN_SIDE:
            raise DimensionTooSmallError(f"image must be at least {MIN_SIDE}x{MIN_SIDE}, got {h}x{w}")
        samples = quantize_8bit(arr)
        if c == 1:
            pil = Image.fromarray(samples[:, :, 0], mode="L")
            kwargs = {}
        else:
            pil = Image.fromarray(samples, mode="RGB")
            kwargs = {"subsampling": 2}
        buf = io.BytesIO()
        pil.save(buf, format="JPEG", quality=qf, **self.options, **kwargs)
        return EncodedArtifact(buf.getvalue(), qf=qf, width=w, height=h, channels=c)

    def decode(self, artifact: EncodedArtifact) -> np.ndarray:
        payload = artifact.payload
        if not payload.startswith(SOI) or not payload.endswith(EOI):
            raise CorruptStreamError("stream is missing the SOI/EOI markers")
        try:
            with Image.open(io.BytesIO(payload)) as pil:
                if pil.format != "JPEG":
                    raise CorruptStreamError(f"not a JPEG stream ({pil.format})")
                pil.load()
                mode = "L" if artifact.channels == 1 else "RGB"
                samples = np.asarray(pil.convert(mode))
        except CorruptStreamError:
            raise
        except (OSError, SyntaxError, ValueError) as exc:
            raise CorruptStreamError(str(exc)) from exc
        if samples.ndim == 2:
            samples = samples[:, :, None]
        if samples.shape[:2] != (artifact.height, artifact.width):
            raise CorruptStreamError(
                f"decoded size {samples.shape[1]}x{samples.shape[0]} does not match "
                f"declared {artifact.width}x{artifact.height}"
            )
        return dequantize_8bit(samples)


DEFAULT_BACKEND = JPEGBackend()


def encode(image, qf: int, backend: CodecBackend = DEFAULT_BACKEND) -> EncodedArtifact:
    return backend.encode(image, qf)


def decode(artifact: EncodedArtifact, backend: CodecBackend = DEFAULT_BACKEND) -> np.ndarray:
    return backend.decode(artifact)


def roundtrip(image, qf: int, backend: CodecBackend = DEFAULT_BACKEND) -> tuple[np.ndarray, int]:
    """Return ``(decode(encode(image, qf)), bit_count)`` from a single encode."""
    artifact = backend.encode(image, qf)
    return backend.decode(artifact), artifact.bit_count


def artifact_from_bytes(payload: bytes, qf: int = 50, channels: int | None = None) -> EncodedArtifact:
    """Wrap a raw JPEG stream, reading its dimensions from the frame header."""
    if not payload.startswith(SOI):
        raise CorruptStreamError("stream does not start with SOI")
    try:
        with Image.open(io.BytesIO(payload)) as pil:
            width, height = pil.size
            bands = len(pil.getbands())
    except (OSError, SyntaxError, ValueError) as exc:
        raise CorruptStreamError(str(exc)) from exc
    if channels is None:
        channels = 1 if bands == 1 else 3
    return EncodedArtifact(payload, qf=qf, width=width, height=height, channels=channels)


# IJG reference luminance table (natural order), scaled by quality in libjpeg
_LUMA_TABLE = np.array(
    [
        16, 11, 10, 16, 24, 40, 51, 61,
        12, 12, 14, 19, 26, 58, 60, 55,
        14, 13, 16, 24, 40, 57, 69, 56,
        14, 17, 22, 29, 51, 87, 80, 62,
        18, 22, 37, 56, 68, 109, 103, 77,
        24, 35, 55, 64, 81, 104, 113, 92,
        49, 64, 78, 87, 103, 121, 120, 101,
        72, 92, 95, 98, 112, 100, 103, 99,
    ]
)  # fmt: skip


def ijg_luma_table(qf: int) -> np.ndarray:
    scale = 5000 // qf if qf < 50 else 200 - 2 * qf
    return np.clip((_LUMA_TABLE * scale + 50) // 100, 1, 255)


def estimate_quality(payload: bytes) -> int:
    """Best-matching IJG quality factor for a stream's luminance quantization table."""
    try:
        with Image.open(io.BytesIO(payload)) as pil:
            table = np.asarray(pil.quantization[0])
    except (OSError, SyntaxError, ValueError, AttributeError, KeyError) as exc:
        raise CorruptStreamError(f"cannot read quantization tables: {exc}") from exc
    errors = [np.abs(ijg_luma_table(q) - table).sum() for q in range(1, 101)]
    return int(np.argmin(errors)) + 1
