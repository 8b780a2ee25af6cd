"""Single-file named-tensor archives.

Layout: an unsigned 64-bit little-endian header length, a JSON header
mapping tensor name -> {dtype, shape, data_offsets}, then the raw
little-endian tensor data. This matches the prevalent single-file weight
format, so archives written here load in common model tooling and vice
versa. String-to-string metadata rides along under "__metadata__".
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

_DTYPES = {
    "F64": np.dtype("<f8"),
    "F32": np.dtype("<f4"),
    "F16": np.dtype("<f2"),
    "I64": np.dtype("<i8"),
    "I32": np.dtype("<i4"),
    "I16": np.dtype("<i2"),
    "I8": np.dtype("i1"),
    "U8": np.dtype("u1"),
    "BOOL": np.dtype("bool"),
}
_DTYPE_NAMES = {v: k for k, v in _DTYPES.items()}


class TensorArchiveError(Exception):
    pass


def dtype_name(dtype: np.dtype) -> str:
    key = np.dtype(dtype).newbyteorder("<")
    if key not in _DTYPE_NAMES:
        raise TensorArchiveError(f"unsupported dtype: {dtype}")
    return _DTYPE_NAMES[key]


@dataclass
class TensorArchive:
    """Named tensors plus metadata, loadable and savable as one file."""

    entries: dict[str, np.ndarray] = field(default_factory=dict)
    metadata: dict[str, str] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)

    def add(self, name: str, array: np.ndarray) -> None:
        if name in self.entries:
            raise TensorArchiveError(f"duplicate tensor name: {name!r}")
        dtype_name(array.dtype)  # reject unsupported dtypes early
        self.entries[name] = np.ascontiguousarray(array)

    def to_bytes(self) -> bytes:
        header: dict[str, object] = {}
        if self.metadata:
            header["__metadata__"] = dict(self.metadata)
        blobs: list[bytes] = []
        offset = 0
        for name in sorted(self.entries):
            arr = self.entries[name]
            blob = np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<")).tobytes()
            header[name] = {
                "dtype": dtype_name(arr.dtype),
                "shape": list(arr.shape),
                "data_offsets": [offset, offset + len(blob)],
            }
            blobs.append(blob)
            offset += len(blob)
        header_bytes = json.dumps(header, sort_keys=True,
                                  separators=(",", ":")).encode("utf-8")
        return struct.pack("<Q", len(header_bytes)) + header_bytes + b"".join(blobs)

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    def digest(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()

    @staticmethod
    def from_bytes(data: bytes) -> "TensorArchive":
        if len(data) < 8:
            raise TensorArchiveError("truncated archive: missing header length")
        (header_len,) = struct.unpack("<Q", data[:8])
        if len(data) < 8 + header_len:
            raise TensorArchiveError("truncated archive: header exceeds file")
        try:
            header = json.loads(data[8:8 + header_len])
        except json.JSONDecodeError as exc:
            raise TensorArchiveError(f"invalid archive header: {exc.msg}") from exc
        body = data[8 + header_len:]
        archive = TensorArchive(metadata=dict(header.pop("__metadata__", {})))
        for name, meta in header.items():
            dtype = _DTYPES.get(meta.get("dtype"))
            if dtype is None:
                raise TensorArchiveError(
                    f"tensor {name!r}: unsupported dtype {meta.get('dtype')!r}")
            shape = tuple(int(s) for s in meta["shape"])
            start, end = meta["data_offsets"]
            expected = dtype.itemsize * int(np.prod(shape, dtype=np.int64)) \
                if shape else dtype.itemsize * 1
            n_elems = int(np.prod(shape, dtype=np.int64)) if shape else 1
            expected = dtype.itemsize * n_elems
            if end - start != expected:
                raise TensorArchiveError(
                    f"tensor {name!r}: buffer length {end - start} does not "
                    f"match dtype x shape ({expected})")
            if end > len(body):
                raise TensorArchiveError(
                    f"tensor {name!r}: data range exceeds file")
            arr = np.frombuffer(body[start:end], dtype=dtype).reshape(shape)
            archive.entries[name] = arr
        return archive

    @staticmethod
    def load(path: str | Path) -> "TensorArchive":
        return TensorArchive.from_bytes(Path(path).read_bytes())
