"""Analytic multiply-accumulate counts for spliced versus dense evaluation."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .densify import densify
from .errors import InputTooShortError, ShapeError
from .graph import DENSE, WINDOWED, NetworkSpec, infer_shapes, receptive_field_time, trace_shapes
from .layers import Activation, BatchNormSpec, ConvSpec, FullyConnectedSpec, PoolSpec


@dataclass(frozen=True)
class LayerCost:
    index: int
    kind: str
    macs: int
    other_ops: int  # pool comparisons, batch-norm and ReLU element ops


@dataclass
class CostFragment:
    layers: list = field(default_factory=list)
    repeats: int = 1  # windows evaluated (spliced) or 1 (dense)

    @property
    def total_macs(self) -> int:
        return self.repeats * sum(l.macs for l in self.layers)

    @property
    def total_other_ops(self) -> int:
        return self.repeats * sum(l.other_ops for l in self.layers)


@dataclass
class CostReport:
    utterance_time: int
    window_size: int
    windows: int
    spliced: CostFragment
    dense: CostFragment

    @property
    def total_macs_spliced(self) -> int:
        return self.spliced.total_macs

    @property
    def total_macs_dense(self) -> int:
        return self.dense.total_macs

    @property
    def ratio(self):
        """Exact spliced/dense ratio; ``None`` for a net without MACs."""
        if self.total_macs_dense == 0:
            return None
        return Fraction(self.total_macs_spliced, self.total_macs_dense)

    def _ratio_fields(self):
        r = self.ratio
        if r is None:
            return "n/a", "n/a"
        return f"{r.numerator}/{r.denominator}", f"{float(r):.6f}"

    def rows(self):
        """Machine-readable records, fixed field order."""
        out = [("summary", self.utterance_time, self.window_size, self.windows,
                self.total_macs_spliced, self.total_macs_dense, *self._ratio_fields())]
        for s in self.spliced.layers:
            out.append(("spliced_layer", s.index, s.kind, s.macs, s.other_ops, self.windows))
        for d in self.dense.layers:
            out.append(("dense_layer", d.index, d.kind, d.macs, d.other_ops, 1))
        return out

    def to_text(self) -> str:
        exact, approx = self._ratio_fields()
        return (
            f"utterance_time {self.utterance_time}\n"
            f"window_size {self.window_size}\n"
            f"windows {self.windows}\n"
            f"macs_spliced {self.total_macs_spliced}\n"
            f"macs_dense {self.total_macs_dense}\n"
            f"ratio {exact} ({approx})\n"
            f"other_ops_spliced {self.spliced.total_other_ops}\n"
            f"other_ops_dense {self.dense.total_other_ops}\n"
        )


def _layer_costs(net: NetworkSpec, input_shape):
    trace = trace_shapes(net, input_shape)
    costs = []
    for idx, (layer, out) in enumerate(zip(net.layers, trace.shapes)):
        elements = 1
        for d in out:
            elements *= d
        if isinstance(layer, ConvSpec):
            macs = elements * layer.in_maps * layer.kernel_f * layer.kernel_t
            costs.append(LayerCost(idx, "conv", macs, 0))
        elif isinstance(layer, FullyConnectedSpec):
            costs.append(LayerCost(idx, "fc", layer.in_dim * layer.out_dim, 0))
        elif isinstance(layer, PoolSpec):
            costs.append(LayerCost(idx, "pool", 0, elements * (layer.size_f * layer.size_t - 1)))
        elif isinstance(layer, BatchNormSpec):
            costs.append(LayerCost(idx, "batchnorm", 0, elements))
        elif isinstance(layer, Activation):
            costs.append(LayerCost(idx, "relu", 0, elements))
    return costs


def _check_length(rf, utterance_time):
    if utterance_time < rf:
        raise InputTooShortError(f"utterance of {utterance_time} frames shorter than receptive field {rf}")


def count_macs_windowed(net: NetworkSpec, utterance_time) -> CostFragment:
    """Cost of evaluating every window of the utterance independently."""
    if net.mode != WINDOWED:
        raise ShapeError("spliced cost needs a windowed net")
    infer_shapes(net)
    rf = receptive_field_time(net)
    _check_length(rf, utterance_time)
    return CostFragment(_layer_costs(net, net.input_shape), utterance_time - rf + 1)


def count_macs_dense(net: NetworkSpec, utterance_time) -> CostFragment:
    """Cost of one pass over the whole utterance; dilation adds no taps."""
    if net.mode != DENSE:
        raise ShapeError("dense cost needs a densified net")
    infer_shapes(net)
    _check_length(receptive_field_time(net), utterance_time)
    m, f, _ = net.input_shape
    return CostFragment(_layer_costs(net, (m, f, utterance_time)), 1)


def cost_report(windowed: NetworkSpec, utterance_time, dense=None) -> CostReport:
    if dense is None:
        dense = densify(windowed)[0]
    spliced = count_macs_windowed(windowed, utterance_time)
    rf = receptive_field_time(windowed)
    return CostReport(utterance_time, rf, spliced.repeats, spliced, count_macs_dense(dense, utterance_time))
