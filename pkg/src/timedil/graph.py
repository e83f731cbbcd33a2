"""Layer-list networks: shape inference, receptive fields, forward evaluation
and the built-in architectures."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputTooShortError, ShapeError
from .layers import (
    Activation,
    BatchNormSpec,
    ConvSpec,
    Flatten,
    FullyConnectedSpec,
    PoolSpec,
    batchnorm_inference,
    conv2d_dilated,
    fully_connected,
    maxpool,
    relu,
)
from .tensor import RandomStream, Tensor3

WINDOWED = "windowed"
DENSE = "dense"
# Diagnostic: FC layers converted to convs but pool strides kept.
STRIDED = "strided"
MODES = (WINDOWED, DENSE, STRIDED)


@dataclass(frozen=True, eq=False)
class NetworkSpec:
    input_shape: tuple
    layers: tuple
    mode: str = WINDOWED

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(d) for d in self.input_shape))
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.mode not in MODES:
            raise ShapeError(f"unknown network mode {self.mode!r}")
        if len(self.input_shape) != 3 or min(self.input_shape) < 1:
            raise ShapeError(f"input shape must be three positive dims, got {self.input_shape}")

    def replace(self, **changes):
        kw = {"input_shape": self.input_shape, "layers": self.layers, "mode": self.mode}
        kw.update(changes)
        return NetworkSpec(**kw)


@dataclass
class ShapeTrace:
    """Output shape after each layer.

    Entries are ``(maps, freq, time)`` tuples up to the flatten marker and
    ``(dim,)`` afterwards.
    """

    input_shape: tuple
    shapes: list = field(default_factory=list)

    @property
    def output(self):
        return self.shapes[-1] if self.shapes else self.input_shape


def _layer_kind(layer):
    return type(layer).__name__


def _step_shape(layer, shape, flat):
    if isinstance(layer, (ConvSpec, PoolSpec)):
        if flat:
            raise ShapeError(f"{_layer_kind(layer)} after flatten")
        return layer.output_shape(shape)
    if isinstance(layer, BatchNormSpec):
        return (layer.output_shape((shape[0], 1, 1))[0],) if flat else layer.output_shape(shape)
    if isinstance(layer, Activation):
        return shape
    if isinstance(layer, Flatten):
        if flat:
            raise ShapeError("second flatten marker")
        return (shape[0] * shape[1] * shape[2],)
    if isinstance(layer, FullyConnectedSpec):
        if not flat:
            raise ShapeError("fully connected layer before flatten")
        if shape[0] != layer.in_dim:
            raise ShapeError(f"fully connected expects {layer.in_dim} inputs, got {shape[0]}")
        return (layer.out_dim,)
    raise ShapeError(f"unknown layer type {_layer_kind(layer)}")


def trace_shapes(net: NetworkSpec, input_shape=None) -> ShapeTrace:
    """Propagate shapes without the mode-level checks of :func:`infer_shapes`."""
    shape = tuple(input_shape or net.input_shape)
    trace = ShapeTrace(shape)
    flat = False
    for idx, layer in enumerate(net.layers):
        try:
            shape = _step_shape(layer, shape, flat)
        except ShapeError as exc:
            raise ShapeError(exc.detail, layer_index=idx) from None
        flat = flat or isinstance(layer, Flatten)
        trace.shapes.append(shape)
    return trace


def infer_shapes(net: NetworkSpec, input_shape=None) -> ShapeTrace:
    trace = trace_shapes(net, input_shape)
    has_flat = any(isinstance(l, Flatten) for l in net.layers)
    if net.mode == WINDOWED:
        out = trace.output
        if not has_flat and len(out) == 3 and out[2] != 1:
            raise ShapeError(f"windowed net ends with time extent {out[2]}, expected 1")
        rf = receptive_field_time(net)
        t_in = (input_shape or net.input_shape)[2]
        if rf != t_in:
            raise ShapeError(f"window of {t_in} frames not fully consumed (receptive field {rf})")
    else:
        for idx, layer in enumerate(net.layers):
            if isinstance(layer, (Flatten, FullyConnectedSpec)):
                raise ShapeError(f"{net.mode} net may not contain {_layer_kind(layer)}", layer_index=idx)
    return trace


def receptive_field_time(net: NetworkSpec) -> int:
    """Frames of input influencing one output, by backward extent propagation."""
    extent = 1
    trace = None
    for idx in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[idx]
        if isinstance(layer, Flatten):
            if trace is None:
                trace = trace_shapes(net)
            before = trace.shapes[idx - 1] if idx > 0 else trace.input_shape
            extent = before[2]
        elif isinstance(layer, ConvSpec):
            extent = (extent - 1) * layer.stride_t + layer.extent_t
        elif isinstance(layer, PoolSpec):
            extent = (extent - 1) * layer.stride_t + layer.extent_t
    return extent


def check_input(net: NetworkSpec, x: Tensor3):
    m, f, t = net.input_shape
    if x.fmaps != m or x.freq != f:
        raise ShapeError(f"input {x.shape} does not match network input {net.input_shape}")
    if net.mode == WINDOWED and x.time != t:
        raise ShapeError(f"windowed net takes exactly {t} frames, got {x.time}")
    if x.time < t:
        raise InputTooShortError(f"input of {x.time} frames shorter than receptive field {t}")


def forward(net: NetworkSpec, x: Tensor3) -> Tensor3:
    """Evaluate ``net`` on ``x`` with the engine kernels.

    Windowed nets return ``out_dim x 1 x 1`` (or the final conv map when the
    net has no FC head); dense nets return ``maps x freq x T_out``.
    """
    check_input(net, x)
    infer_shapes(net, (x.fmaps, x.freq, net.input_shape[2]))
    h = x
    for layer in net.layers:
        if isinstance(layer, ConvSpec):
            h = conv2d_dilated(h, layer)
        elif isinstance(layer, PoolSpec):
            h = maxpool(h, layer)
        elif isinstance(layer, BatchNormSpec):
            h = batchnorm_inference(h, layer)
        elif isinstance(layer, Activation):
            h = relu(h)
        elif isinstance(layer, Flatten):
            h = Tensor3._wrap(h.data.reshape(-1, 1, 1))
        elif isinstance(layer, FullyConnectedSpec):
            h = Tensor3._wrap(fully_connected(h.data, layer).reshape(-1, 1, 1))
    return h


def output_vectors(out: Tensor3) -> np.ndarray:
    """``T x (maps*freq)`` view of a network output, one row per position."""
    arr = out.array
    return arr.reshape(arr.shape[0] * arr.shape[1], arr.shape[2]).T


def networks_equal(a: NetworkSpec, b: NetworkSpec) -> bool:
    """Structural equality with bitwise comparison of every weight array."""
    if a.input_shape != b.input_shape or a.mode != b.mode or len(a.layers) != len(b.layers):
        return False
    for la, lb in zip(a.layers, b.layers):
        if type(la) is not type(lb):
            return False
        for name in la.__dataclass_fields__:
            va, vb = getattr(la, name), getattr(lb, name)
            if isinstance(va, np.ndarray):
                if va.shape != vb.shape or va.tobytes() != vb.tobytes():
                    return False
            elif va != vb:
                return False
    return True


# --- built-in architectures ---------------------------------------------------


def _scaled(stream, fan_in, *shape):
    # He-style uniform init keeps activations O(1) through deep stacks.
    return stream.uniform(*shape) * np.float32(math.sqrt(6.0 / fan_in))


def random_conv(stream, in_maps, out_maps, k_f, k_t, **kw) -> ConvSpec:
    w = _scaled(stream, in_maps * k_f * k_t, out_maps, in_maps, k_f, k_t)
    b = stream.uniform(out_maps) * np.float32(0.1)
    return ConvSpec(w, b, **kw)


def random_fc(stream, in_dim, out_dim) -> FullyConnectedSpec:
    w = _scaled(stream, in_dim, out_dim, in_dim)
    b = stream.uniform(out_dim) * np.float32(0.1)
    return FullyConnectedSpec(w, b)


def random_batchnorm(stream, maps) -> BatchNormSpec:
    return BatchNormSpec(
        mean=stream.uniform(maps) * np.float32(0.1),
        variance=np.float32(1.0) + stream.uniform(maps) * np.float32(0.25),
        scale=np.float32(1.0) + stream.uniform(maps) * np.float32(0.1),
        shift=stream.uniform(maps) * np.float32(0.1),
    )


# (maps, convs, pool (f, t)) per block after the 7x7 input conv.
TABLE1_BLOCKS = ((64, 3, (2, 1)), (128, 3, (2, 1)), (256, 3, (2, 2)), (512, 3, (2, 2)))
TABLE1_INPUT = (3, 64, 48)
TABLE1_FC = (2048, 2048, 2048, 1024)


class _ZeroStream:
    """Stands in for a RandomStream when only the layer shapes matter."""

    def uniform(self, *shape):
        return np.zeros(shape, dtype=np.float32)


def build_table1(num_outputs=32000, seed=0, with_weights=True) -> NetworkSpec:
    """The 13-conv VGG-style acoustic model on 3x64x48 windows.

    Each conv and each hidden FC is followed by batch norm then ReLU; the
    classifier FC emits raw logits. ``with_weights=False`` fills every
    parameter with zeros, which is much faster at full width.
    """
    if num_outputs < 1:
        raise ShapeError("num_outputs must be >= 1")
    rs = RandomStream(seed) if with_weights else _ZeroStream()
    layers = []

    def conv_bn_relu(cin, cout, k, pad):
        layers.extend([random_conv(rs, cin, cout, k, k, pad_f=pad), random_batchnorm(rs, cout), Activation()])

    conv_bn_relu(3, 64, 7, 3)
    layers.append(PoolSpec(2, 1, 2, 1))
    maps = 64
    for out_maps, n_conv, (pf, pt) in TABLE1_BLOCKS:
        for _ in range(n_conv):
            conv_bn_relu(maps, out_maps, 3, 1)
            maps = out_maps
        layers.append(PoolSpec(pf, pt, pf, pt))
    layers.append(Flatten())
    dim = 512 * 2 * 3
    for width in TABLE1_FC:
        layers.extend([random_fc(rs, dim, width), random_batchnorm(rs, width), Activation()])
        dim = width
    layers.append(random_fc(rs, dim, num_outputs))
    return NetworkSpec(TABLE1_INPUT, layers, WINDOWED)


def build_fig1_toy(seed=0, maps=1, freq=1) -> NetworkSpec:
    """conv3 / pool2-s2 / conv3 in time: an 8-frame window to one output."""
    rs = RandomStream(seed)
    layers = [
        random_conv(rs, maps, maps, 1, 3),
        PoolSpec(1, 2, 1, 2),
        random_conv(rs, maps, maps, 1, 3),
    ]
    return NetworkSpec((maps, freq, 8), layers, WINDOWED)
