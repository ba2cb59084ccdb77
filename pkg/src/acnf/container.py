"""Standard-compatible file format: a JPEG stream with framework metadata in APP11.

Layout of the inserted segment (placed directly after SOI, big-endian)::

    FF EB                 APP11 marker
    00 15                 segment length (21 = 2 length bytes + 19 payload bytes)
    41 43 4E 46           magic "ACNF"
    vv                    format version
    ss                    scale code (0 -> 1.0, 1 -> 0.75, 2 -> 0.5)
    qq                    JPEG quality factor
    WW WW                 original width
    HH HH                 original height
    ii x 8                model id (digest of the PPNet weight set)

Stock decoders skip APP segments, so a packed file decodes to exactly the
same pixels as the bare stream.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .codec import EOI, SOI, CorruptStreamError, EncodedArtifact, artifact_from_bytes, estimate_quality

MAGIC = b"ACNF"
VERSION = 1
APP11 = 0xEB
META = struct.Struct(">4sBBBHH8s")
SEGMENT_OVERHEAD = 2 + 2 + META.size
SCALE_CODES = {1.0: 0, 0.75: 1, 0.5: 2}
CODE_SCALES = {v: k for k, v in SCALE_CODES.items()}
FILE_SUFFIX = ".acnf.jpg"


class MalformedArtifactError(ValueError):
    pass


class CorruptMetadataError(ValueError):
    pass


@dataclass(frozen=True)
class ContainerMetadata:
    scale: float
    qf: int
    orig_width: int
    orig_height: int
    model_id: bytes = bytes(8)
    version: int = VERSION

    def __post_init__(self):
        if float(self.scale) not in SCALE_CODES:
            raise ValueError(f"scale must be one of {sorted(SCALE_CODES)}, got {self.scale}")
        if not 1 <= self.qf <= 100:
            raise ValueError(f"qf out of range: {self.qf}")
        if not (0 < self.orig_width < 1 << 16 and 0 < self.orig_height < 1 << 16):
            raise ValueError("original dimensions must fit in 16 bits")
        if len(self.model_id) != 8:
            raise ValueError("model id must be 8 bytes")

    @property
    def scale_code(self) -> int:
        return SCALE_CODES[float(self.scale)]

    def to_bytes(self) -> bytes:
        return META.pack(MAGIC, self.version, self.scale_code, self.qf, self.orig_width, self.orig_height, self.model_id)

    @classmethod
    def from_bytes(cls, raw: bytes) -> "ContainerMetadata":
        if len(raw) != META.size:
            raise CorruptMetadataError(f"metadata payload is {len(raw)} bytes, expected {META.size}")
        magic, version, code, qf, w, h, model_id = META.unpack(raw)
        if magic != MAGIC:
            raise CorruptMetadataError(f"bad magic {magic!r}")
        if version != VERSION:
            raise CorruptMetadataError(f"unsupported container version {version}")
        if code not in CODE_SCALES:
            raise CorruptMetadataError(f"bad scale code {code}")
        try:
            return cls(CODE_SCALES[code], qf, w, h, model_id, version)
        except ValueError as exc:
            raise CorruptMetadataError(str(exc)) from exc


def pack(artifact: EncodedArtifact, meta: ContainerMetadata) -> bytes:
    """Insert the metadata segment right after SOI."""
    payload = artifact.payload
    if not payload.startswith(SOI) or not payload.endswith(EOI):
        raise MalformedArtifactError("artifact payload is not a complete JPEG stream")
    if meta.orig_width < artifact.width or meta.orig_height < artifact.height:
        raise ValueError("original dimensions must not be smaller than the compact image")
    body = meta.to_bytes()
    segment = struct.pack(">BBH", 0xFF, APP11, 2 + len(body)) + body
    return SOI + segment + payload[2:]


def _find_segment(data: bytes) -> tuple[int, int] | None:
    """Return (start, end) of the first ACNF APP11 segment before SOS, if any."""
    pos = 2
    n = len(data)
    while pos + 4 <= n:
        if data[pos] != 0xFF:
            raise CorruptStreamError(f"expected a marker at offset {pos}")
        marker = data[pos + 1]
        if marker == 0xFF:  # fill byte
            pos += 1
            continue
        if marker == 0xDA or marker == 0xD9:  # SOS / EOI: no more header segments
            return None
        (length,) = struct.unpack_from(">H", data, pos + 2)
        if marker == APP11:
            peek = data[pos + 4 : pos + 8]
            if peek == MAGIC or (peek and len(peek) < 4 and MAGIC.startswith(peek)):
                if length != 2 + META.size or pos + 2 + length > n:
                    raise CorruptMetadataError(f"ACNF segment is truncated or has length {length}")
                return pos, pos + 2 + length
        if length < 2:
            raise CorruptStreamError(f"invalid segment length {length} at offset {pos}")
        pos += 2 + length
    return None


def unpack(data: bytes) -> tuple[EncodedArtifact, ContainerMetadata | None]:
    """Split a file into the bare JPEG stream and its metadata (``None`` for plain JPEG)."""
    if not data.startswith(SOI):
        raise CorruptStreamError("file does not start with SOI")
    span = _find_segment(data)
    if span is None:
        return artifact_from_bytes(data, estimate_quality(data)), None
    start, end = span
    meta = ContainerMetadata.from_bytes(data[start + 4 : end])
    stream = data[:start] + data[end:]
    artifact = artifact_from_bytes(stream, meta.qf)
    return artifact, meta
