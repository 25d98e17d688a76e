"""Parsing of architecture strings such as ``1x29x29-20C4-MP2-40C5-MP3-150N-10N``.

Grammar (tokens separated by ``-``):

* ``MxHxW``      input with M maps of H x W pixels (first token only)
* ``<n>C<k>``    valid convolution, n output maps, k x k kernels, stride 1
* ``MP<p>``      non-overlapping p x p max pooling; ``<n>MP<p>`` is also
                 accepted when n equals the current map count
* ``<n>N``       fully connected layer with n units

Every convolution is fully connected across maps.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Union


class DescriptorError(ValueError):
    """Base class; ``token`` names the offending token when there is one."""

    def __init__(self, message: str, token: str | None = None):
        super().__init__(message)
        self.token = token


class UnknownTokenError(DescriptorError):
    pass


class InputTokenError(DescriptorError):
    pass


class PoolingDivisibilityError(DescriptorError):
    pass


class KernelTooLargeError(DescriptorError):
    pass


class MapPrefixMismatchError(DescriptorError):
    pass


class StructureError(DescriptorError):
    pass


@dataclass(frozen=True)
class Input:
    maps: int
    height: int
    width: int


@dataclass(frozen=True)
class Conv:
    maps: int
    kernel: int


@dataclass(frozen=True)
class MaxPool:
    size: int


@dataclass(frozen=True)
class Fully:
    units: int


LayerSpec = Union[Input, Conv, MaxPool, Fully]


@dataclass(frozen=True)
class NetDescriptor:
    layers: tuple
    shapes: tuple = field(compare=True)

    @property
    def input_shape(self) -> tuple[int, int, int]:
        return self.shapes[0]

    @property
    def class_count(self) -> int:
        return self.layers[-1].units

    def param_counts(self) -> list[int]:
        """Trainable parameter count per layer (0 for input and pooling)."""
        counts = []
        prev = None
        for spec, shape in zip(self.layers, self.shapes):
            if isinstance(spec, Conv):
                counts.append(spec.maps * prev[0] * spec.kernel**2 + spec.maps)
            elif isinstance(spec, Fully):
                fan_in = 1
                for e in prev:
                    fan_in *= e
                counts.append(spec.units * fan_in + spec.units)
            else:
                counts.append(0)
            prev = shape
        return counts

    def __str__(self) -> str:
        return format_descriptor(self)


_INPUT = re.compile(r"^(\d+)x(\d+)x(\d+)$")
_CONV = re.compile(r"^(\d+)C(\d+)$")
_POOL = re.compile(r"^(\d+)?MP(\d+)$")
_FULLY = re.compile(r"^(\d+)N$")


def parse_descriptor(text: str) -> NetDescriptor:
    tokens = text.strip().split("-")
    m = _INPUT.match(tokens[0])
    if not m:
        raise InputTokenError(f"first token must be MxHxW, got {tokens[0]!r}", tokens[0])
    maps, h, w = (int(g) for g in m.groups())
    if min(maps, h, w) < 1:
        raise InputTokenError(f"input extents must be positive in {tokens[0]!r}", tokens[0])

    layers: list = [Input(maps, h, w)]
    shapes: list = [(maps, h, w)]
    flat = False
    for tok in tokens[1:]:
        if m := _CONV.match(tok):
            n, k = int(m.group(1)), int(m.group(2))
            if flat:
                raise StructureError(f"spatial layer {tok!r} after a fully connected layer", tok)
            if n < 1 or k < 1:
                raise UnknownTokenError(f"conv parameters must be positive in {tok!r}", tok)
            _, h, w = shapes[-1]
            if k > h or k > w:
                raise KernelTooLargeError(f"kernel {k} larger than {h}x{w} input at {tok!r}", tok)
            layers.append(Conv(n, k))
            shapes.append((n, h - k + 1, w - k + 1))
        elif m := _POOL.match(tok):
            p = int(m.group(2))
            if flat:
                raise StructureError(f"spatial layer {tok!r} after a fully connected layer", tok)
            if p < 2:
                raise UnknownTokenError(f"pool size must be >= 2 in {tok!r}", tok)
            c, h, w = shapes[-1]
            if m.group(1) is not None and int(m.group(1)) != c:
                raise MapPrefixMismatchError(
                    f"{tok!r} names {m.group(1)} maps but the previous layer has {c}", tok)
            if h % p or w % p:
                raise PoolingDivisibilityError(f"pool {p} does not divide {h}x{w} at {tok!r}", tok)
            layers.append(MaxPool(p))
            shapes.append((c, h // p, w // p))
        elif m := _FULLY.match(tok):
            n = int(m.group(1))
            if n < 1:
                raise UnknownTokenError(f"unit count must be positive in {tok!r}", tok)
            layers.append(Fully(n))
            shapes.append((n,))
            flat = True
        else:
            raise UnknownTokenError(f"unknown token {tok!r}", tok)

    if not isinstance(layers[-1], Fully):
        raise StructureError(f"descriptor must end with a fully connected output layer, not {tokens[-1]!r}", tokens[-1])
    return NetDescriptor(tuple(layers), tuple(shapes))


def format_descriptor(d: NetDescriptor) -> str:
    parts = []
    for spec in d.layers:
        if isinstance(spec, Input):
            parts.append(f"{spec.maps}x{spec.height}x{spec.width}")
        elif isinstance(spec, Conv):
            parts.append(f"{spec.maps}C{spec.kernel}")
        elif isinstance(spec, MaxPool):
            parts.append(f"MP{spec.size}")
        else:
            parts.append(f"{spec.units}N")
    return "-".join(parts)


def describe(d: NetDescriptor) -> str:
    """Per-layer table of types, shapes, kernels and parameter counts."""
    rows = [("layer", "type", "maps & neurons", "kernel", "params")]
    for i, (spec, shape, n) in enumerate(zip(d.layers, d.shapes, d.param_counts())):
        if isinstance(spec, Input):
            row = ("input", f"{shape[0]} maps of {shape[1]}x{shape[2]} neurons", "")
        elif isinstance(spec, Conv):
            row = ("convolutional", f"{shape[0]} maps of {shape[1]}x{shape[2]} neurons",
                   f"{spec.kernel}x{spec.kernel}")
        elif isinstance(spec, MaxPool):
            row = ("max pooling", f"{shape[0]} maps of {shape[1]}x{shape[2]} neurons",
                   f"{spec.size}x{spec.size}")
        else:
            row = ("fully connected", f"{shape[0]} neurons", "1x1")
        rows.append((str(i), *row, str(n)))
    widths = [max(len(r[c]) for r in rows) for c in range(5)]
    lines = ["  ".join(cell.ljust(wd) for cell, wd in zip(r, widths)).rstrip() for r in rows]
    lines.append(f"total parameters: {sum(d.param_counts())}")
    return "\n".join(lines)
