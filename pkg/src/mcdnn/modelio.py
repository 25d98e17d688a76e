"""Binary model files.

Layout (all integers little-endian)::

    b"MCD1"                     magic
    uint32                      format version (1)
    uint32 + UTF-8              descriptor string
    uint32 + UTF-8              preprocessor chain
    uint64                      seed
    per layer after the input, in network order:
        uint8                   kind (1 conv, 2 max pooling, 3 fully connected)
        uint64                  parameter count
        float64 * count         conv: weights [out][in][row][col] then biases [out]
                                fully: weights [out][in] then biases [out]
                                pooling: nothing (count 0)

Trailing bytes are an error.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .descriptor import parse_descriptor
from .ensemble import Column
from .layers import ConvLayer, FullyLayer, MaxPoolLayer
from .network import Network
from .preprocess import parse_chain

MAGIC = b"MCD1"
VERSION = 1
KIND_CONV, KIND_POOL, KIND_FULLY = 1, 2, 3


class ModelFormatError(ValueError):
    pass


def _kind(layer) -> int:
    if isinstance(layer, ConvLayer):
        return KIND_CONV
    if isinstance(layer, MaxPoolLayer):
        return KIND_POOL
    if isinstance(layer, FullyLayer):
        return KIND_FULLY
    raise TypeError(f"unknown layer {layer!r}")


def _string(s: str) -> bytes:
    b = s.encode("utf-8")
    return struct.pack("<I", len(b)) + b


def model_bytes(col: Column) -> bytes:
    parts = [MAGIC, struct.pack("<I", VERSION), _string(str(col.descriptor)),
             _string(str(col.preprocessor)), struct.pack("<Q", col.seed & 0xFFFFFFFFFFFFFFFF)]
    for layer in col.net.layers:
        flat = [p.ravel() for p in layer.params]
        values = np.concatenate(flat) if flat else np.zeros(0)
        parts.append(struct.pack("<BQ", _kind(layer), values.size))
        parts.append(values.astype("<f8").tobytes())
    return b"".join(parts)


def save_model(path, col: Column) -> Path:
    path = Path(path)
    path.write_bytes(model_bytes(col))
    return path


class _Reader:
    def __init__(self, data: bytes, name: str):
        self.data, self.pos, self.name = data, 0, name

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ModelFormatError(f"{self.name}: truncated at byte {len(self.data)}, need {self.pos + n}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def string(self) -> str:
        (n,) = self.unpack("<I")
        try:
            return self.take(n).decode("utf-8")
        except UnicodeDecodeError as e:
            raise ModelFormatError(f"{self.name}: bad UTF-8 string") from e


def model_from_bytes(data: bytes, name: str = "<bytes>") -> Column:
    r = _Reader(data, name)
    if r.take(4) != MAGIC:
        raise ModelFormatError(f"{name}: not a model file (bad magic)")
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise ModelFormatError(f"{name}: unsupported format version {version}")
    net = Network(parse_descriptor(r.string()))
    pre = parse_chain(r.string())
    (seed,) = r.unpack("<Q")
    for i, layer in enumerate(net.layers):
        kind, count = r.unpack("<BQ")
        if kind != _kind(layer):
            raise ModelFormatError(f"{name}: layer {i + 1} kind {kind}, descriptor says {_kind(layer)}")
        expected = sum(p.size for p in layer.params)
        if count != expected:
            raise ModelFormatError(f"{name}: layer {i + 1} holds {count} parameters, expected {expected}")
        values = np.frombuffer(r.take(8 * count), dtype="<f8")
        offset = 0
        for p in layer.params:
            p[...] = values[offset:offset + p.size].reshape(p.shape)
            offset += p.size
    if r.pos != len(data):
        raise ModelFormatError(f"{name}: {len(data) - r.pos} trailing bytes")
    return Column(net, pre, seed)


def load_model(path) -> Column:
    path = Path(path)
    return model_from_bytes(path.read_bytes(), str(path))


def is_model_file(path) -> bool:
    with open(path, "rb") as f:
        return f.read(4) == MAGIC


def read_manifest(path) -> list[Path]:
    """Model paths listed one per line; relative paths resolve against the manifest's directory."""
    path = Path(path)
    out = []
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        p = Path(line)
        out.append(p if p.is_absolute() else path.parent / p)
    return out


def write_manifest(path, model_paths) -> Path:
    path = Path(path)
    lines = []
    for p in model_paths:
        p = Path(p)
        try:
            lines.append(str(p.relative_to(path.parent)))
        except ValueError:
            lines.append(str(p))
    path.write_text("\n".join(lines) + "\n")
    return path
