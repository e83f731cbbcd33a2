"""Layer parameter records and the five pure layer operations.

Convolutions are valid in time (no time padding ever) and zero-padded
symmetrically in frequency. Kernels are stored 0-based: tap ``j`` of a time
kernel reads input frame ``t * stride + j * dilation``, so the anchor is the
first tap and receptive-field arithmetic works on extents.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ShapeError
from .tensor import Tensor3


def _f32(a, ndim, name):
    arr = np.ascontiguousarray(a, dtype=np.float32)
    if arr.ndim != ndim:
        raise ShapeError(f"{name} must have {ndim} axes, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


def _positive(name, value):
    if int(value) != value or value < 1:
        raise ShapeError(f"{name} must be an integer >= 1, got {value!r}")
    return int(value)


@dataclass(frozen=True, eq=False)
class ConvSpec:
    weights: np.ndarray  # out_maps x in_maps x kernel_f x kernel_t
    bias: np.ndarray
    dilation_f: int = 1
    dilation_t: int = 1
    pad_f: int = 0
    stride_t: int = 1

    def __post_init__(self):
        w = _f32(self.weights, 4, "conv weights")
        b = _f32(self.bias, 1, "conv bias")
        if w.size == 0 or b.shape[0] != w.shape[0]:
            raise ShapeError(f"conv bias {b.shape} inconsistent with weights {w.shape}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)
        for name in ("dilation_f", "dilation_t", "stride_t"):
            object.__setattr__(self, name, _positive(name, getattr(self, name)))
        if int(self.pad_f) != self.pad_f or self.pad_f < 0:
            raise ShapeError(f"pad_f must be a non-negative integer, got {self.pad_f!r}")
        object.__setattr__(self, "pad_f", int(self.pad_f))

    out_maps = property(lambda self: self.weights.shape[0])
    in_maps = property(lambda self: self.weights.shape[1])
    kernel_f = property(lambda self: self.weights.shape[2])
    kernel_t = property(lambda self: self.weights.shape[3])

    @property
    def extent_f(self):
        return (self.kernel_f - 1) * self.dilation_f + 1

    @property
    def extent_t(self):
        return (self.kernel_t - 1) * self.dilation_t + 1

    def output_shape(self, shape):
        maps, freq, time = shape
        if maps != self.in_maps:
            raise ShapeError(f"conv expects {self.in_maps} input maps, got {maps}")
        padded = freq + 2 * self.pad_f
        if padded < self.extent_f:
            raise ShapeError(f"conv frequency extent {self.extent_f} exceeds padded input {padded}")
        if time < self.extent_t:
            raise ShapeError(f"conv time extent {self.extent_t} exceeds input length {time}")
        t_out = (time - self.extent_t) // self.stride_t + 1
        return (self.out_maps, padded - self.extent_f + 1, t_out)


@dataclass(frozen=True)
class PoolSpec:
    """Max pooling. ``dilation_t`` spaces the time taps; it stays 1 in
    windowed networks and is set by densification."""

    size_f: int
    size_t: int
    stride_f: int
    stride_t: int
    dilation_t: int = 1

    def __post_init__(self):
        for name in ("size_f", "size_t", "stride_f", "stride_t", "dilation_t"):
            object.__setattr__(self, name, _positive(name, getattr(self, name)))
        if self.stride_t > self.size_t:
            raise ShapeError(f"pool time stride {self.stride_t} exceeds its size {self.size_t}")

    @property
    def extent_t(self):
        return (self.size_t - 1) * self.dilation_t + 1

    def output_shape(self, shape):
        maps, freq, time = shape
        if freq < self.size_f or time < self.extent_t:
            raise ShapeError(
                f"pool window {self.size_f}x{self.extent_t} larger than input {freq}x{time}"
            )
        return (
            maps,
            (freq - self.size_f) // self.stride_f + 1,
            (time - self.extent_t) // self.stride_t + 1,
        )


@dataclass(frozen=True, eq=False)
class BatchNormSpec:
    """Frozen per-feature-map statistics, shared across frequency and time."""

    mean: np.ndarray
    variance: np.ndarray
    scale: np.ndarray
    shift: np.ndarray
    epsilon: float = 1e-5

    def __post_init__(self):
        vecs = [_f32(getattr(self, n), 1, n) for n in ("mean", "variance", "scale", "shift")]
        if len({v.shape for v in vecs}) != 1:
            raise ShapeError("batch norm vectors must share one length")
        if np.any(vecs[1] < 0):
            raise ShapeError("batch norm variance must be non-negative")
        if not self.epsilon > 0:
            raise ShapeError("batch norm epsilon must be positive")
        for n, v in zip(("mean", "variance", "scale", "shift"), vecs):
            object.__setattr__(self, n, v)
        object.__setattr__(self, "epsilon", float(self.epsilon))

    @property
    def fmaps(self):
        return self.mean.shape[0]

    def factors(self):
        """Per-map (mean, multiplier, shift) with ``multiplier = scale / sqrt(var + eps)``."""
        mult = self.scale / np.sqrt(self.variance + np.float32(self.epsilon))
        return self.mean, mult.astype(np.float32), self.shift

    def output_shape(self, shape):
        if shape[0] != self.fmaps:
            raise ShapeError(f"batch norm has {self.fmaps} maps, input has {shape[0]}")
        return tuple(shape)


@dataclass(frozen=True, eq=False)
class FullyConnectedSpec:
    weights: np.ndarray  # out_dim x in_dim
    bias: np.ndarray

    def __post_init__(self):
        w = _f32(self.weights, 2, "fc weights")
        b = _f32(self.bias, 1, "fc bias")
        if w.size == 0 or b.shape[0] != w.shape[0]:
            raise ShapeError(f"fc bias {b.shape} inconsistent with weights {w.shape}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    out_dim = property(lambda self: self.weights.shape[0])
    in_dim = property(lambda self: self.weights.shape[1])


@dataclass(frozen=True)
class Activation:
    kind: str = "relu"

    def __post_init__(self):
        if self.kind != "relu":
            raise ShapeError(f"unsupported activation {self.kind!r}")


@dataclass(frozen=True)
class Flatten:
    """Marks the (maps, freq, time) -> vector boundary of a windowed net."""

    tag: str = field(default="flatten", repr=False)


def conv2d_dilated(x: Tensor3, spec: ConvSpec) -> Tensor3:
    spec.output_shape(x.shape)
    arr = x.array
    if spec.pad_f:
        arr = np.pad(arr, ((0, 0), (spec.pad_f, spec.pad_f), (0, 0)))
    out = kernels.conv2d(arr, spec.weights, spec.bias, spec.dilation_f, spec.dilation_t, spec.stride_t)
    return Tensor3._wrap(out)


def maxpool(x: Tensor3, spec: PoolSpec) -> Tensor3:
    spec.output_shape(x.shape)
    out = kernels.maxpool(
        x.array, spec.size_f, spec.size_t, spec.stride_f, spec.stride_t, spec.dilation_t
    )
    return Tensor3._wrap(out)


def batchnorm_inference(x: Tensor3, spec: BatchNormSpec) -> Tensor3:
    spec.output_shape(x.shape)
    mean, mult, shift = spec.factors()
    out = (x.array - mean[:, None, None]) * mult[:, None, None] + shift[:, None, None]
    return Tensor3._wrap(out)


def relu(x: Tensor3) -> Tensor3:
    arr = x.array
    # where() rather than maximum(): never emits -0.0
    return Tensor3._wrap(np.where(arr > 0, arr, np.float32(0)))


def fully_connected(x, spec: FullyConnectedSpec) -> np.ndarray:
    vec = np.ascontiguousarray(x, dtype=np.float32).reshape(-1)
    if vec.shape[0] != spec.in_dim:
        raise ShapeError(f"fc expects {spec.in_dim} inputs, got {vec.shape[0]}")
    return kernels.fully_connected(vec, spec.weights, spec.bias)
