"""Versioned little-endian binary container for named float32 arrays.

Layout::

    magic       4 bytes   b"BDCN"
    version     u32
    count       u64       number of records
    meta_len    u32       followed by meta_len bytes of UTF-8 "key = value" lines
    records     count x { u32 name_len, name bytes, u32 rank, rank x u64 dims, float32 data }
"""

import struct
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import CheckpointIntegrityError

MAGIC = b"BDCN"
FORMAT_VERSION = 1

_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")


@dataclass
class Container:
    """Decoded contents of a container file."""

    records: dict[str, np.ndarray]
    meta: dict[str, str] = field(default_factory=dict)
    version: int = FORMAT_VERSION


def encode_meta(meta: Mapping[str, str]) -> bytes:
    lines = []
    for key, value in meta.items():
        if "\n" in key or "=" in key or "\n" in str(value):
            raise CheckpointIntegrityError(f"Metadata entry cannot be encoded: {key!r}")
        lines.append(f"{key} = {value}")
    return "\n".join(lines).encode("utf-8")


def decode_meta(raw: bytes) -> dict[str, str]:
    meta: dict[str, str] = {}
    for line in raw.decode("utf-8").splitlines():
        if not line.strip():
            continue
        key, sep, value = line.partition(" = ")
        if not sep:
            raise CheckpointIntegrityError(f"Malformed metadata line: {line!r}")
        meta[key] = value
    return meta


def write_container(path: Path, records: Mapping[str, np.ndarray], meta: Mapping[str, str] | None = None) -> None:
    """Write ``records`` as raw little-endian float32 with an optional metadata block."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta_bytes = encode_meta(meta or {})

    temp_file = path.with_suffix(path.suffix + ".tmp")
    with open(temp_file, "wb") as f:
        f.write(MAGIC)
        f.write(_U32.pack(FORMAT_VERSION))
        f.write(_U64.pack(len(records)))
        f.write(_U32.pack(len(meta_bytes)))
        f.write(meta_bytes)
        for name, array in records.items():
            encoded = name.encode("utf-8")
            f.write(_U32.pack(len(encoded)))
            f.write(encoded)
            f.write(_U32.pack(array.ndim))
            for dim in array.shape:
                f.write(_U64.pack(dim))
            f.write(np.ascontiguousarray(array, dtype="<f4").tobytes())
    # Atomic rename
    temp_file.replace(path)


def read_container(path: Path) -> Container:
    """Read a container, raising CheckpointIntegrityError on any structural problem."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Container file not found: {path}")
    raw = path.read_bytes()
    reader = _Reader(raw, path)

    if reader.take(4) != MAGIC:
        raise CheckpointIntegrityError(f"Bad magic bytes in {path}; not a bdcnet container")
    version = reader.u32()
    if version != FORMAT_VERSION:
        raise CheckpointIntegrityError(f"Unsupported container version {version} in {path}")
    count = reader.u64()
    meta = decode_meta(reader.take(reader.u32()))

    records: dict[str, np.ndarray] = {}
    for _ in range(count):
        name = reader.take(reader.u32()).decode("utf-8")
        rank = reader.u32()
        shape = tuple(reader.u64() for _ in range(rank))
        size = int(np.prod(shape, dtype=np.int64)) if shape else 1
        data = np.frombuffer(reader.take(4 * size), dtype="<f4").astype(np.float32)
        records[name] = data.reshape(shape)
    if reader.remaining():
        raise CheckpointIntegrityError(f"{reader.remaining()} trailing bytes in {path}")
    return Container(records=records, meta=meta, version=version)


class _Reader:
    def __init__(self, raw: bytes, path: Path):
        self.raw = raw
        self.path = path
        self.offset = 0

    def take(self, n: int) -> bytes:
        end = self.offset + n
        if end > len(self.raw):
            raise CheckpointIntegrityError(f"Truncated container: {self.path}")
        chunk = self.raw[self.offset : end]
        self.offset = end
        return chunk

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def u64(self) -> int:
        return _U64.unpack(self.take(8))[0]

    def remaining(self) -> int:
        return len(self.raw) - self.offset
