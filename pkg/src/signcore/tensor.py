"""Dense float64 tensors and seeded random streams.

A tensor is a C-contiguous ``numpy.ndarray`` of dtype float64.  Layout is
row-major everywhere: images are ``[H, W, C]`` (batches ``[N, H, W, C]``),
kernel banks ``[OutC, InC, Kh, Kw]``, dense weights ``[Out, In]``.  The flat
offset of image element ``(i, j, c)`` is ``(i * W + j) * C + c``.

Randomness comes from :class:`Rng`, a PCG64 generator (O'Neill 2014, 128-bit
state) seeded through numpy's ``SeedSequence`` with the stream id as spawn
key.  The raw output for a given ``(seed, stream)`` is fixed by numpy's
bit-generator stability guarantee and does not depend on the platform.
"""
from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

DTYPE = np.float64

# Spawn-key tag keeping per-sample augmentation streams disjoint from numbered streams.
_DERIVED_TAG = 0x5A17


class TensorError(ValueError):
    """Raised on shape or size mismatches."""


def check_shape(shape: Iterable[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in shape)
    if not dims:
        raise TensorError("shape must have at least one dimension")
    if any(d < 1 for d in dims):
        raise TensorError(f"every extent must be >= 1, got {list(dims)}")
    if math.prod(dims) > np.iinfo(np.intp).max:
        raise TensorError(f"shape {list(dims)} exceeds the addressable range")
    return dims


class Rng:
    """Seeded random stream.

    ``Rng(seed, stream)`` always replays the same sequence; different stream
    ids from one seed are independent PCG64 instances.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed) & 0xFFFF_FFFF_FFFF_FFFF
        self.stream = int(stream)
        self._gen = self._make(self.seed, (self.stream,))

    @staticmethod
    def _make(seed, spawn_key):
        ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in spawn_key))
        return np.random.Generator(np.random.PCG64(ss))

    @classmethod
    def derived(cls, seed: int, *keys: int) -> "Rng":
        """Stream keyed by arbitrary integers, e.g. ``(seed, sample, copy)``."""
        rng = cls.__new__(cls)
        rng.seed = int(seed) & 0xFFFF_FFFF_FFFF_FFFF
        rng.stream = -1
        rng._gen = cls._make(rng.seed, (_DERIVED_TAG,) + tuple(keys))
        return rng

    def spawn(self, stream: int) -> "Rng":
        return Rng(self.seed, stream)

    def raw(self, n: int) -> np.ndarray:
        """Next ``n`` raw 64-bit outputs of the underlying generator."""
        return self._gen.bit_generator.random_raw(n)

    def uniform(self, lo=0.0, hi=1.0, size=None):
        return self._gen.uniform(lo, hi, size)

    def normal(self, mu=0.0, sigma=1.0, size=None):
        return self._gen.normal(mu, sigma, size)

    def random(self, size=None):
        return self._gen.random(size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def bernoulli(self, p: float) -> bool:
        return bool(self._gen.random() < p)

    def __repr__(self):
        return f"Rng(seed={self.seed}, stream={self.stream})"


def zeros(shape) -> np.ndarray:
    return np.zeros(check_shape(shape), dtype=DTYPE)


def ones(shape) -> np.ndarray:
    return np.ones(check_shape(shape), dtype=DTYPE)


def full(shape, value: float) -> np.ndarray:
    return np.full(check_shape(shape), float(value), dtype=DTYPE)


def from_values(shape, values: Sequence[float]) -> np.ndarray:
    dims = check_shape(shape)
    flat = np.asarray(values, dtype=DTYPE).ravel()
    expected = math.prod(dims)
    if flat.size != expected:
        raise TensorError(f"shape {list(dims)} needs {expected} values, got {flat.size}")
    return flat.reshape(dims).copy()


def uniform(shape, lo: float, hi: float, rng: Rng) -> np.ndarray:
    return rng.uniform(lo, hi, check_shape(shape)).astype(DTYPE, copy=False)


def normal(shape, mu: float, sigma: float, rng: Rng) -> np.ndarray:
    return rng.normal(mu, sigma, check_shape(shape)).astype(DTYPE, copy=False)


def tensor_create(shape, fill: str = "zeros", **kw) -> np.ndarray:
    """Build a tensor from a named fill rule.

    ``fill`` is one of ``zeros``, ``ones``, ``constant`` (``value=``),
    ``from_values`` (``values=``), ``uniform`` (``lo=, hi=, rng=``) or
    ``normal`` (``mu=, sigma=, rng=``).
    """
    if fill == "zeros":
        return zeros(shape)
    if fill == "ones":
        return ones(shape)
    if fill == "constant":
        return full(shape, kw["value"])
    if fill == "from_values":
        return from_values(shape, kw["values"])
    if fill == "uniform":
        return uniform(shape, kw.get("lo", 0.0), kw.get("hi", 1.0), kw["rng"])
    if fill == "normal":
        return normal(shape, kw.get("mu", 0.0), kw.get("sigma", 1.0), kw["rng"])
    raise TensorError(f"unknown fill rule {fill!r}")


def reshape(t: np.ndarray, new_shape) -> np.ndarray:
    dims = check_shape(new_shape)
    if math.prod(dims) != t.size:
        raise TensorError(f"cannot reshape {t.size} elements into {list(dims)}")
    return np.ascontiguousarray(t).reshape(dims)


def flatten(t: np.ndarray) -> np.ndarray:
    if t.ndim < 1:
        raise TensorError("flatten needs rank >= 1")
    return np.ascontiguousarray(t).reshape(-1)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.ndim != 2 or b.ndim != 2:
        raise TensorError(f"matmul needs rank-2 operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise TensorError(f"inner dimensions differ: {a.shape} x {b.shape}")
    return a @ b


def argmax(t: np.ndarray) -> int:
    if t.ndim != 1:
        raise TensorError(f"argmax needs a rank-1 tensor, got shape {t.shape}")
    if t.size == 0:
        raise TensorError("argmax of an empty tensor")
    return int(np.argmax(t))  # first index on ties
