"""Dense float64 arrays and the seeded generator used everywhere.

Tensors are plain ``numpy.ndarray`` objects with dtype float64 in C
(row-major) order. The helpers here only enforce that contract.

Randomness comes from :class:`Rng`, a thin wrapper around numpy's PCG64
bit generator (O'Neill's PCG XSL-RR 128/64). PCG64 is a published
algorithm and numpy keeps its stream stable across platforms and
releases, so the same seed gives the same draws everywhere.
"""

from __future__ import annotations

from functools import reduce as _fold
from typing import Callable, Iterable, Sequence

import numpy as np

DTYPE = np.float64

# PCG64 128-bit LCG multiplier, as used by numpy's implementation.
PCG64_MULTIPLIER = 0x2360ED051FC65DA44385DF649FCCF645


class InvalidShapeError(ValueError):
    pass


class InvalidRangeError(ValueError):
    pass


def _check_shape(shape: Sequence[int]) -> tuple[int, ...]:
    shape = tuple(int(s) for s in shape)
    if not shape or any(s < 1 for s in shape):
        raise InvalidShapeError(f"extents must all be >= 1, got {shape}")
    return shape


def tensor_new(shape: Sequence[int], fill: float = 0.0) -> np.ndarray:
    """Return a float64 array of ``shape`` with every element equal to ``fill``."""
    return np.full(_check_shape(shape), fill, dtype=DTYPE)


def as_tensor(values, shape: Sequence[int] | None = None) -> np.ndarray:
    t = np.ascontiguousarray(values, dtype=DTYPE)
    if shape is not None:
        shape = _check_shape(shape)
        if int(np.prod(shape)) != t.size:
            raise InvalidShapeError(f"cannot view {t.size} values as {shape}")
        t = t.reshape(shape)
    return t


def elementwise(t: np.ndarray, f: Callable[[float], float]) -> np.ndarray:
    """Apply ``f`` to every element; vectorized numpy ufuncs are passed straight through."""
    if isinstance(f, np.ufunc):
        return f(t).astype(DTYPE, copy=False)
    out = np.fromiter((f(v) for v in np.ravel(t)), dtype=DTYPE, count=np.size(t))
    return out.reshape(np.shape(t))


def reduce(t, op: Callable[[float, float], float], init: float) -> float:
    return float(_fold(op, np.ravel(np.asarray(t, dtype=DTYPE)).tolist(), init))


class Rng:
    """Seeded PCG64 stream.

    Each training column, dataset generator and distortion pass owns one
    of these; they are never shared between workers. ``child(k)`` derives
    an independent stream from ``(seed, k)`` without touching this one.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.bitgen = np.random.PCG64(self.seed)
        self.gen = np.random.Generator(self.bitgen)

    def random(self, size=None):
        """Uniform doubles in [0, 1) with 53 random bits each."""
        return self.gen.random(size)

    def uniform(self, lo: float, hi: float, size=None):
        return lo + (hi - lo) * self.gen.random(size)

    def integers(self, lo: int, hi: int, size=None):
        return self.gen.integers(lo, hi, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self.gen.permutation(n)

    def raw(self, n: int) -> np.ndarray:
        """Next ``n`` raw 64-bit outputs of the bit generator."""
        return self.bitgen.random_raw(n)

    def child(self, key: int) -> "Rng":
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(int(key),))
        return Rng(int(ss.generate_state(1, np.uint64)[0]))

    def get_state(self) -> dict:
        return self.bitgen.state

    def set_state(self, state: dict) -> None:
        self.bitgen.state = state


def fill_uniform(t: np.ndarray, rng: Rng, lo: float, hi: float) -> np.ndarray:
    """Fill ``t`` in place with i.i.d. U[lo, hi) draws in row-major order and return it.

    One generator step is consumed per element.
    """
    if not lo < hi:
        raise InvalidRangeError(f"need lo < hi, got [{lo}, {hi})")
    vals = lo + (hi - lo) * rng.random(t.size)
    # lo + (hi-lo)*u can round up to hi for u close to 1
    np.minimum(vals, np.nextafter(hi, lo), out=vals)
    t[...] = vals.reshape(t.shape)
    return t


def flat_index(shape: Sequence[int], index: Iterable[int]) -> int:
    """Row-major offset of a multi-index."""
    offset = 0
    for extent, i in zip(shape, index):
        offset = offset * extent + i
    return offset
