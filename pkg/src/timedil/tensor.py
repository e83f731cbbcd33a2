"""Immutable (fmaps, freq, time) float32 tensors, a seeded generator and the
binary dump format used for golden files."""
from __future__ import annotations

import struct

import numpy as np

from .errors import BoundsError, DimensionError

_MAX_ELEMENTS = 2**31 - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _check_dims(fmaps, freq, time):
    dims = (fmaps, freq, time)
    for d in dims:
        if isinstance(d, bool) or not isinstance(d, (int, np.integer)):
            raise DimensionError(f"dimensions must be integers, got {dims}")
        if d < 1:
            raise DimensionError(f"all dimensions must be >= 1, got {dims}")
    if fmaps * freq * time > _MAX_ELEMENTS:
        raise DimensionError(f"tensor of shape {dims} is too large")
    return tuple(int(d) for d in dims)


class Tensor3:
    """Dense feature-maps x frequency x time array of 32-bit reals.

    Storage is C order with time fastest. The backing array is read-only;
    operations that "modify" a tensor return a new one.
    """

    __slots__ = ("_array",)

    def __init__(self, array):
        arr = np.array(array, dtype=np.float32, copy=True, order="C")
        if arr.ndim != 3:
            raise DimensionError(f"expected a 3-axis array, got shape {arr.shape}")
        _check_dims(*arr.shape)
        arr.flags.writeable = False
        self._array = arr

    @classmethod
    def _wrap(cls, arr):
        # Takes ownership of a fresh float32 array without copying.
        obj = cls.__new__(cls)
        arr = np.ascontiguousarray(arr, dtype=np.float32)
        _check_dims(*arr.shape)
        arr.flags.writeable = False
        obj._array = arr
        return obj

    @property
    def array(self) -> np.ndarray:
        return self._array

    @property
    def data(self) -> np.ndarray:
        """Flat view in storage order."""
        return self._array.reshape(-1)

    @property
    def shape(self):
        return self._array.shape

    @property
    def fmaps(self) -> int:
        return self._array.shape[0]

    @property
    def freq(self) -> int:
        return self._array.shape[1]

    @property
    def time(self) -> int:
        return self._array.shape[2]

    def get(self, m, f, t) -> float:
        self._check_index(m, f, t)
        return float(self._array[m, f, t])

    def with_value(self, m, f, t, value) -> Tensor3:
        self._check_index(m, f, t)
        arr = self._array.copy()
        arr[m, f, t] = value
        return Tensor3._wrap(arr)

    def _check_index(self, m, f, t):
        for i, n in zip((m, f, t), self.shape):
            if not 0 <= i < n:
                raise BoundsError(f"index {(m, f, t)} outside shape {self.shape}")

    def __eq__(self, other):
        if not isinstance(other, Tensor3):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self._array, other._array)

    __hash__ = None

    def __repr__(self):
        return f"Tensor3({self.fmaps}x{self.freq}x{self.time})"


def zeros(fmaps, freq, time) -> Tensor3:
    dims = _check_dims(fmaps, freq, time)
    return Tensor3._wrap(np.zeros(dims, dtype=np.float32))


def splitmix64(seed, count, offset=0) -> np.ndarray:
    """Outputs ``offset .. offset+count-1`` of the SplitMix64 stream for ``seed``.

    SplitMix64 is a Weyl counter finished with xorshift-multiply rounds, so
    element ``i`` depends only on ``(seed, i)`` and the stream can be produced
    in one vectorized pass.
    """
    with np.errstate(over="ignore"):
        idx = np.arange(offset + 1, offset + count + 1, dtype=np.uint64)
        z = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + idx * _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def uniform_pm1(seed, count, offset=0) -> np.ndarray:
    """Map the top 24 bits of each draw to ``k * 2**-23 - 1``, exact in float32."""
    k = (splitmix64(seed, count, offset) >> np.uint64(40)).astype(np.float32)
    return k * np.float32(2.0**-23) - np.float32(1.0)


class RandomStream:
    """Sequential consumer of one SplitMix64 stream (used for weight init)."""

    def __init__(self, seed):
        self.seed = int(seed)
        self.position = 0

    def uniform(self, *shape) -> np.ndarray:
        n = int(np.prod(shape, dtype=np.int64))
        out = uniform_pm1(self.seed, n, self.position)
        self.position += n
        return out.reshape(shape)


def seeded_random(fmaps, freq, time, seed) -> Tensor3:
    """Values uniform in [-1, 1), bit-identical for identical (dims, seed)."""
    dims = _check_dims(fmaps, freq, time)
    n = dims[0] * dims[1] * dims[2]
    return Tensor3._wrap(uniform_pm1(int(seed), n).reshape(dims))


def slice_time(tensor: Tensor3, start, length) -> Tensor3:
    if start < 0 or length < 1 or start + length > tensor.time:
        raise BoundsError(
            f"time window [{start}, {start + length}) outside [0, {tensor.time})"
        )
    return Tensor3._wrap(tensor.array[:, :, start : start + length].copy())


def pad_time(tensor: Tensor3, left, right) -> Tensor3:
    """Zero-pad the time axis (caller-side utterance padding)."""
    arr = np.pad(tensor.array, ((0, 0), (0, 0), (left, right)))
    return Tensor3._wrap(arr)


def dumps(tensor: Tensor3) -> bytes:
    header = struct.pack("<3I", *tensor.shape)
    return header + tensor.array.astype("<f4", copy=False).tobytes()


def loads(blob: bytes) -> Tensor3:
    if len(blob) < 12:
        raise DimensionError("tensor dump shorter than its 12-byte header")
    dims = _check_dims(*struct.unpack_from("<3I", blob, 0))
    n = dims[0] * dims[1] * dims[2]
    if len(blob) != 12 + 4 * n:
        raise DimensionError(f"tensor dump holds {len(blob) - 12} payload bytes, expected {4 * n}")
    arr = np.frombuffer(blob, dtype="<f4", offset=12).astype(np.float32).reshape(dims)
    return Tensor3._wrap(arr)


def save(tensor: Tensor3, path):
    with open(path, "wb") as fh:
        fh.write(dumps(tensor))


def load(path) -> Tensor3:
    with open(path, "rb") as fh:
        return loads(fh.read())
