"""Rewrite a windowed classifier into a dense (whole-utterance) network.

Every pooling layer that strides in time is switched to stride 1 and every
later time-indexed layer gets its time dilation multiplied by that stride.
Fully connected layers become convolutions: the first one takes a kernel
covering the whole pre-flatten map, the rest become 1x1.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .errors import AlreadyDenseError, InputTooShortError, UnsupportedFeatureError
from .graph import DENSE, STRIDED, WINDOWED, NetworkSpec, infer_shapes, receptive_field_time
from .layers import ConvSpec, Flatten, FullyConnectedSpec, PoolSpec


@dataclass(frozen=True)
class LayerRewrite:
    index: int
    kind: str
    old_stride_t: int
    new_stride_t: int
    old_dilation_t: int
    new_dilation_t: int
    factor_after: int


@dataclass(frozen=True)
class FcConversion:
    index: int
    in_dim: int
    out_dim: int
    in_maps: int
    kernel_f: int
    kernel_t: int
    dilation_t: int


@dataclass
class DensifyReport:
    rewrites: list = field(default_factory=list)
    fc_conversions: list = field(default_factory=list)
    receptive_field_before: int = 0
    receptive_field_after: int = 0

    def dilation_of(self, index):
        for r in self.rewrites:
            if r.index == index:
                return r.new_dilation_t
        for c in self.fc_conversions:
            if c.index == index:
                return c.dilation_t
        raise KeyError(index)

    def to_text(self) -> str:
        lines = [
            f"receptive_field_before {self.receptive_field_before}",
            f"receptive_field_after {self.receptive_field_after}",
        ]
        for r in self.rewrites:
            lines.append(
                f"layer {r.index} {r.kind} stride_t {r.old_stride_t}->{r.new_stride_t}"
                f" dilation_t {r.old_dilation_t}->{r.new_dilation_t} factor_after {r.factor_after}"
            )
        for c in self.fc_conversions:
            lines.append(
                f"layer {c.index} fc {c.out_dim}x{c.in_dim} -> conv {c.out_dim}x{c.in_maps}"
                f"x{c.kernel_f}x{c.kernel_t} dilation_t {c.dilation_t}"
            )
        return "\n".join(lines) + "\n"


def _convert_fc(net, keep_strides):
    """Shared body of :func:`densify` and :func:`convolutionalize`."""
    if net.mode != WINDOWED:
        raise AlreadyDenseError(f"network is already in {net.mode} mode")
    trace = infer_shapes(net)
    report = DensifyReport(receptive_field_before=receptive_field_time(net))
    factor = 1
    first_fc = True
    pre_flat = None
    layers = []
    for idx, layer in enumerate(net.layers):
        if isinstance(layer, ConvSpec):
            if layer.stride_t != 1:
                raise UnsupportedFeatureError(f"layer {idx}: conv with time stride {layer.stride_t}")
            dil = layer.dilation_t * factor
            new = ConvSpec(layer.weights, layer.bias, layer.dilation_f, dil, layer.pad_f, 1)
            report.rewrites.append(LayerRewrite(idx, "conv", 1, 1, layer.dilation_t, dil, factor))
            layers.append(new)
        elif isinstance(layer, PoolSpec):
            dil = layer.dilation_t * factor
            stride = layer.stride_t if keep_strides else 1
            new = PoolSpec(layer.size_f, layer.size_t, layer.stride_f, stride, dil)
            if not keep_strides:
                factor *= layer.stride_t
            report.rewrites.append(
                LayerRewrite(idx, "pool", layer.stride_t, stride, layer.dilation_t, dil, factor)
            )
            layers.append(new)
        elif isinstance(layer, Flatten):
            pre_flat = trace.shapes[idx - 1] if idx > 0 else trace.input_shape
        elif isinstance(layer, FullyConnectedSpec):
            if first_fc:
                maps, k_f, k_t = pre_flat
                # flatten order is (map, freq, time), the conv's (in_map, kf, kt)
                w = layer.weights.reshape(layer.out_dim, maps, k_f, k_t)
                first_fc = False
            else:
                maps, k_f, k_t = layer.in_dim, 1, 1
                w = layer.weights.reshape(layer.out_dim, maps, 1, 1)
            # a 1x1 kernel is unaffected by dilation; set it anyway so every
            # conv follows the same cumulative-factor rule
            dil = factor
            layers.append(ConvSpec(w, layer.bias, 1, dil, 0, 1))
            report.fc_conversions.append(
                FcConversion(idx, layer.in_dim, layer.out_dim, maps, k_f, k_t, dil)
            )
        else:
            layers.append(layer)
    mode = STRIDED if keep_strides else DENSE
    out = NetworkSpec(net.input_shape, layers, mode)
    report.receptive_field_after = receptive_field_time(out)
    return out, report


def densify(net: NetworkSpec):
    """Return ``(dense_net, report)``; the input net is left untouched."""
    return _convert_fc(net, keep_strides=False)


def convolutionalize(net: NetworkSpec) -> NetworkSpec:
    """FC-to-conv conversion only, pool strides kept.

    Slid over an utterance this emits one output per ``prod(time strides)``
    frames, the downsampled sequence densification exists to avoid.
    """
    return _convert_fc(net, keep_strides=True)[0]


def time_stride_product(net: NetworkSpec) -> int:
    p = 1
    for layer in net.layers:
        if isinstance(layer, PoolSpec):
            p *= layer.stride_t
    return p


def dense_output_length(net: NetworkSpec, utterance_time) -> int:
    rf = receptive_field_time(net)
    if utterance_time < rf:
        raise InputTooShortError(f"utterance of {utterance_time} frames shorter than receptive field {rf}")
    return utterance_time - rf + 1
