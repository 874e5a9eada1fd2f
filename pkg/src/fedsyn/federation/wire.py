"""Binary parameter format shared by the simulated wire and ``.fsyn`` files.

Layout, little-endian::

    b"FSYN" | version u32 (=1) | entry count u32 |
    per entry: name length u16 | UTF-8 name | ndims u8 | dims u32 * ndims |
               float32 values, row-major
"""

from __future__ import annotations

import math
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from ..exceptions import FormatError, NumericDomainError
from ..params import ParamSet

MAGIC = b"FSYN"
VERSION = 1
EXTENSION = ".fsyn"


def serialize_params(params: ParamSet) -> bytes:
    params.check_finite("parameters to serialize")
    out = [MAGIC, struct.pack("<II", VERSION, len(params))]
    for name, arr in params.items():
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise FormatError(f"entry name {name[:20]!r}... is too long")
        if arr.ndim > 0xFF:
            raise FormatError(f"entry {name!r} has too many dimensions")
        out.append(struct.pack("<H", len(raw)))
        out.append(raw)
        out.append(struct.pack(f"<B{arr.ndim}I", arr.ndim, *arr.shape))
        values = np.ascontiguousarray(arr, dtype="<f4")
        if not np.all(np.isfinite(values)):
            raise NumericDomainError(f"entry {name!r} overflows float32")
        out.append(values.tobytes())
    return b"".join(out)


def deserialize_params(payload: bytes) -> ParamSet:
    """Decode a payload; any defect raises :class:`FormatError`."""
    buf = memoryview(bytes(payload))
    pos = 0

    def take(n: int, what: str):
        nonlocal pos
        if pos + n > len(buf):
            raise FormatError(f"truncated {what}: need {n} bytes, have {len(buf) - pos}", offset=pos)
        chunk = buf[pos:pos + n]
        pos += n
        return chunk

    if bytes(take(4, "magic")) != MAGIC:
        raise FormatError("bad magic, expected b'FSYN'", offset=0)
    (version,) = struct.unpack("<I", take(4, "version"))
    if version != VERSION:
        raise FormatError(f"unsupported format version {version}", offset=4)
    (count,) = struct.unpack("<I", take(4, "entry count"))

    entries = []
    seen = set()
    for _ in range(count):
        start = pos
        (name_len,) = struct.unpack("<H", take(2, "name length"))
        try:
            name = bytes(take(name_len, "entry name")).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"entry name is not UTF-8: {exc.reason}", offset=start + 2) from None
        if not name or name in seen:
            raise FormatError(f"empty or duplicate entry name {name!r}", offset=start)
        seen.add(name)
        (ndims,) = struct.unpack("<B", take(1, "ndims"))
        shape = struct.unpack(f"<{ndims}I", take(4 * ndims, "dimensions"))
        n_values = math.prod(shape)
        raw = take(4 * n_values, f"values of {name!r}")
        try:
            values = np.frombuffer(raw, dtype="<f4").reshape(shape)
        except ValueError as exc:
            raise FormatError(f"unusable shape {shape} for {name!r}: {exc}", offset=start) from None
        if not np.all(np.isfinite(values)):
            raise FormatError(f"entry {name!r} holds non-finite values", offset=pos - len(raw))
        entries.append((name, values.astype(np.float64)))
    if pos != len(buf):
        raise FormatError(f"{len(buf) - pos} trailing bytes after last entry", offset=pos)
    return ParamSet(entries)


def atomic_write_bytes(path, data: bytes) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=path.name + ".", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_checkpoint(path, params: ParamSet) -> None:
    atomic_write_bytes(path, serialize_params(params))


def load_checkpoint(path) -> ParamSet:
    return deserialize_params(Path(path).read_bytes())
