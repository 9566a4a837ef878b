"""Binary checkpoint format.

Layout (all integers little-endian)::

    u32 manifest length | manifest (UTF-8 key=value lines, values are JSON)
    u32 array count
    per array: u16 name length | name | u8 ndim | u32 dims... | u32 element count | f32 data
    u32 CRC32 of every preceding byte

The manifest is read and its ``format_version`` checked before the checksum,
so a file from a newer writer reports a version problem rather than
corruption.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import CorruptCheckpoint, VersionMismatch
from .smiles import TokenDictionary

FORMAT_VERSION = 1


def _manifest(model) -> bytes:
    fields = {
        "format_version": FORMAT_VERSION,
        "params": model.get_params(),
        "dictionary": list(model.dictionary_.tokens),
        "panel": model.gene_panel_,
        "max_len": model.max_len_,
        "ic50_bounds": list(model.ic50_bounds_) if getattr(model, "ic50_bounds_", None) else None,
    }
    lines = [f"{k}={json.dumps(v, sort_keys=True)}" for k, v in fields.items()]
    return ("\n".join(lines) + "\n").encode("utf-8")


def to_bytes(model) -> bytes:
    manifest = _manifest(model)
    parts = [struct.pack("<I", len(manifest)), manifest]
    arrays = model.state_arrays()
    parts.append(struct.pack("<I", len(arrays)))
    for name, arr in arrays.items():
        raw = name.encode("utf-8")
        data = np.ascontiguousarray(arr, dtype="<f4")
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack("<B", data.ndim) + struct.pack(f"<{data.ndim}I", *data.shape))
        parts.append(struct.pack("<I", data.size) + data.tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def save_checkpoint(model, path):
    Path(path).write_bytes(to_bytes(model))


class _Reader:
    def __init__(self, buf):
        self.buf, self.pos = buf, 0

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise CorruptCheckpoint("checkpoint is truncated")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def _parse_manifest(raw: bytes) -> dict:
    out = {}
    try:
        for line in raw.decode("utf-8").splitlines():
            key, _, value = line.partition("=")
            out[key] = json.loads(value)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptCheckpoint(f"unreadable manifest: {exc}") from None
    return out


def from_bytes(buf: bytes):
    from .model import PaccMann

    reader = _Reader(buf)
    (n,) = reader.unpack("<I")
    manifest = _parse_manifest(reader.take(n))
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"checkpoint format version {version}, this reader supports {FORMAT_VERSION}")
    if len(buf) < 4 or zlib.crc32(buf[:-4]) != struct.unpack("<I", buf[-4:])[0]:
        raise CorruptCheckpoint("checksum mismatch")
    arrays = {}
    (count,) = reader.unpack("<I")
    for _ in range(count):
        (name_len,) = reader.unpack("<H")
        name = reader.take(name_len).decode("utf-8")
        (ndim,) = reader.unpack("<B")
        shape = reader.unpack(f"<{ndim}I")
        (size,) = reader.unpack("<I")
        if size != int(np.prod(shape, dtype=np.int64)):
            raise CorruptCheckpoint(f"array {name}: length {size} does not match shape {shape}")
        arrays[name] = np.frombuffer(reader.take(4 * size), dtype="<f4").reshape(shape)
    if reader.pos != len(buf) - 4:
        raise CorruptCheckpoint("trailing bytes after the last array")
    try:
        model = PaccMann(**manifest["params"])
        model.build(TokenDictionary(manifest["dictionary"]), manifest["panel"], manifest["max_len"])
        dt = np.dtype(model.dtype)
        model.load_state_arrays({k: v.astype(dt) for k, v in arrays.items()})
    except KeyError as exc:
        raise CorruptCheckpoint(f"missing entry {exc}") from None
    bounds = manifest.get("ic50_bounds")
    model.ic50_bounds_ = tuple(bounds) if bounds else None
    return model


def load_checkpoint(path):
    return from_bytes(Path(path).read_bytes())
