"""Ordered named-tensor checkpoint container and its binary file format.

The on-disk container (SWPT v1) is little-endian throughout:

    magic "SWPT" (4 bytes) | version u32 = 1 | entry_count u64
    per entry: path_len u16 | path UTF-8 bytes | ndim u8 |
               dims: ndim x u64 | payload: product(dims) x f32

Entry order is preserved byte-exactly across save/load, and paths are
unique.  Loading trusts the header-declared extents but never reads (or
allocates) past them, so a truncated payload fails with the entry named.
"""

import hashlib
import io
import math
import struct
from typing import BinaryIO, Iterator

import numpy as np

from .tensor import as_tensor

__all__ = [
    "NamedWeights",
    "SwptError",
    "BadMagicError",
    "UnsupportedVersionError",
    "TruncatedError",
    "DuplicatePathError",
    "save",
    "load",
    "save_file",
    "load_file",
]

MAGIC = b"SWPT"
VERSION = 1

_HEADER = struct.Struct("<4sIQ")
_PATH_LEN = struct.Struct("<H")
_NDIM = struct.Struct("<B")


class SwptError(ValueError):
    """Base class for checkpoint container format errors."""


class BadMagicError(SwptError):
    pass


class UnsupportedVersionError(SwptError):
    pass


class TruncatedError(SwptError):
    pass


class DuplicatePathError(SwptError):
    pass


class NamedWeights:
    """Insertion-ordered map from parameter path to a float32 tensor."""

    def __init__(self) -> None:
        self._entries: dict[str, np.ndarray] = {}

    def add(self, path: str, tensor) -> None:
        if path in self._entries:
            raise DuplicatePathError(f"duplicate path: {path!r}")
        self._entries[path] = as_tensor(tensor, name=path)

    def __contains__(self, path: str) -> bool:
        return path in self._entries

    def __getitem__(self, path: str) -> np.ndarray:
        try:
            return self._entries[path]
        except KeyError:
            raise KeyError(f"missing parameter path: {path!r}") from None

    def __len__(self) -> int:
        return len(self._entries)

    def paths(self) -> list[str]:
        return list(self._entries)

    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        return iter(self._entries.items())

    def bitwise_equal(self, other: "NamedWeights") -> bool:
        """True when paths, order, shapes and payload bytes all match."""
        if self.paths() != other.paths():
            return False
        return all(
            a.shape == other._entries[p].shape
            and a.tobytes() == other._entries[p].tobytes()
            for p, a in self.items()
        )

    def checksum(self) -> str:
        """SHA-256 over the serialized container; stable across runs."""
        sink = io.BytesIO()
        save(self, sink)
        return hashlib.sha256(sink.getvalue()).hexdigest()


def save(weights: NamedWeights, sink: BinaryIO) -> int:
    """Serialize ``weights`` to ``sink``; returns the number of bytes written."""
    written = sink.write(_HEADER.pack(MAGIC, VERSION, len(weights)))
    for path, tensor in weights.items():
        encoded = path.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise SwptError(f"path too long for container: {path!r}")
        written += sink.write(_PATH_LEN.pack(len(encoded)))
        written += sink.write(encoded)
        written += sink.write(_NDIM.pack(tensor.ndim))
        written += sink.write(struct.pack(f"<{tensor.ndim}Q", *tensor.shape))
        written += sink.write(tensor.astype("<f4", copy=False).tobytes())
    return written


def _read_exact(source: BinaryIO, n: int, context: str) -> bytes:
    buf = source.read(n)
    if len(buf) != n:
        raise TruncatedError(f"truncated stream while reading {context}")
    return buf


def load(source: BinaryIO) -> NamedWeights:
    """Exact inverse of :func:`save`."""
    magic, version, count = _HEADER.unpack(_read_exact(source, _HEADER.size, "header"))
    if magic != MAGIC:
        raise BadMagicError(f"bad magic: {magic!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported version: {version}")
    weights = NamedWeights()
    for i in range(count):
        (path_len,) = _PATH_LEN.unpack(
            _read_exact(source, _PATH_LEN.size, f"path length of entry {i}")
        )
        path = _read_exact(source, path_len, f"path of entry {i}").decode("utf-8")
        (ndim,) = _NDIM.unpack(_read_exact(source, _NDIM.size, f"rank of {path!r}"))
        dims = struct.unpack(
            f"<{ndim}Q", _read_exact(source, 8 * ndim, f"dims of {path!r}")
        )
        payload_bytes = 4 * math.prod(dims)
        buf = _read_exact(source, payload_bytes, f"payload of {path!r}")
        tensor = np.frombuffer(buf, dtype="<f4").reshape(dims)
        if path in weights:
            raise DuplicatePathError(f"duplicate path: {path!r}")
        weights.add(path, tensor)
    return weights


def save_file(weights: NamedWeights, path) -> int:
    with open(path, "wb") as sink:
        return save(weights, sink)


def load_file(path) -> NamedWeights:
    with open(path, "rb") as source:
        return load(source)
