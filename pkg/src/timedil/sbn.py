"""Stacked bottleneck networks as two DNNs and as one time-dilated CNN.

Stage 1 maps a window of input frames to a bottleneck vector. Stage 2 reads
the bottleneck vectors at a fixed set of evenly spaced offsets around the
centre frame. Read as a CNN, stage 1 is a conv whose kernel covers the whole
window followed by 1x1 convs, and stage 2 is a conv with one tap per offset
dilated by the offset spacing, followed by 1x1 convs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputTooShortError, ShapeError
from .graph import DENSE, NetworkSpec, random_fc
from .layers import Activation, ConvSpec
from .tensor import RandomStream, Tensor3

DEFAULT_OFFSETS = (-10, -5, 0, 5, 10)


@dataclass(frozen=True)
class SbnSpec:
    input_maps: int = 1
    input_freq: int = 8
    window: int = 11
    hidden1: tuple = (32,)
    bottleneck: int = 8
    hidden2: tuple = (32,)
    outputs: int = 10
    offsets: tuple = DEFAULT_OFFSETS
    aux_outputs: int = 0  # size of the optional stage-1 auxiliary classifier

    def __post_init__(self):
        object.__setattr__(self, "hidden1", tuple(int(h) for h in self.hidden1))
        object.__setattr__(self, "hidden2", tuple(int(h) for h in self.hidden2))
        object.__setattr__(self, "offsets", tuple(int(o) for o in self.offsets))
        dims = (self.input_maps, self.input_freq, self.window, self.bottleneck, self.outputs)
        if min(dims + self.hidden1 + self.hidden2) < 1 or self.aux_outputs < 0:
            raise ShapeError(f"SBN dimensions must be positive: {self}")
        if not self.offsets:
            raise ShapeError("SBN needs at least one bottleneck offset")
        steps = {b - a for a, b in zip(self.offsets, self.offsets[1:])}
        if len(steps) > 1 or (steps and min(steps) < 1):
            raise ShapeError(f"offsets {self.offsets} are not an increasing arithmetic progression")

    @property
    def taps(self) -> int:
        return len(self.offsets)

    @property
    def spacing(self) -> int:
        return self.offsets[1] - self.offsets[0] if self.taps > 1 else 1

    @property
    def receptive_field(self) -> int:
        return self.window + self.offsets[-1] - self.offsets[0]


@dataclass(frozen=True, eq=False)
class SbnWeights:
    """Weight matrices shared by both representations.

    ``stage1``/``stage2`` hold ``(W, b)`` pairs in DNN form; the last pair of
    each stage is linear (bottleneck and output logits).
    """

    stage1: tuple
    stage2: tuple
    aux: tuple = ()


def sbn_weights(spec: SbnSpec, seed=0) -> SbnWeights:
    rs = RandomStream(seed)
    d1 = spec.input_maps * spec.input_freq * spec.window
    stage1 = []
    for width in spec.hidden1 + (spec.bottleneck,):
        fc = random_fc(rs, d1, width)
        stage1.append((fc.weights, fc.bias))
        d1 = width
    d2 = spec.bottleneck * spec.taps
    stage2 = []
    for width in spec.hidden2 + (spec.outputs,):
        fc = random_fc(rs, d2, width)
        stage2.append((fc.weights, fc.bias))
        d2 = width
    aux = ()
    if spec.aux_outputs:
        fc = random_fc(rs, spec.bottleneck, spec.aux_outputs)
        aux = ((fc.weights, fc.bias),)
    return SbnWeights(tuple(stage1), tuple(stage2), aux)


def _conv_from_matrix(w, b, in_maps, k_f, k_t, dil_t=1):
    return ConvSpec(w.reshape(w.shape[0], in_maps, k_f, k_t), b, 1, dil_t, 0, 1)


def build_sbn_as_cnn(spec: SbnSpec, seed=0, weights: SbnWeights | None = None) -> NetworkSpec:
    """Dense-mode CNN equal to the two-stage SBN."""
    w = weights or sbn_weights(spec, seed)
    layers = []
    n1 = len(w.stage1)
    for k, (W, b) in enumerate(w.stage1):
        if k == 0:
            layers.append(_conv_from_matrix(W, b, spec.input_maps, spec.input_freq, spec.window))
        else:
            layers.append(_conv_from_matrix(W, b, W.shape[1], 1, 1))
        if k < n1 - 1:
            layers.append(Activation())
    n2 = len(w.stage2)
    for k, (W, b) in enumerate(w.stage2):
        if k == 0:
            # stage-2 input is the bottleneck window flattened map-major
            layers.append(_conv_from_matrix(W, b, spec.bottleneck, 1, spec.taps, spec.spacing))
        else:
            layers.append(_conv_from_matrix(W, b, W.shape[1], 1, 1))
        if k < n2 - 1:
            layers.append(Activation())
    return NetworkSpec((spec.input_maps, spec.input_freq, spec.receptive_field), layers, DENSE)


def _dnn(layers, x):
    """Sequential-accumulation MLP with ReLU between layers, linear last."""
    for k, (W, b) in enumerate(layers):
        acc = np.zeros(W.shape[0], dtype=np.float32)
        for i in range(W.shape[1]):
            acc += W[:, i] * x[i]
        x = acc + b
        if k < len(layers) - 1:
            x = np.where(x > 0, x, np.float32(0))
    return x


def stage1_bottleneck(weights: SbnWeights, spec: SbnSpec, utterance: Tensor3, start) -> np.ndarray:
    window = utterance.array[:, :, start : start + spec.window]
    return _dnn(weights.stage1, window.reshape(-1))


def stage1_aux(weights: SbnWeights, spec: SbnSpec, utterance: Tensor3, start) -> np.ndarray:
    """Auxiliary classifier on top of one bottleneck; not part of the cascade."""
    if not weights.aux:
        raise ShapeError("SBN built without an auxiliary head")
    bn = stage1_bottleneck(weights, spec, utterance, start)
    return _dnn(weights.aux, bn)


def eval_sbn_two_stage(spec: SbnSpec, utterance: Tensor3, seed=0, weights: SbnWeights | None = None):
    """Reference cascade: every bottleneck recomputed from its own window.

    Returns ``n_centres x outputs``; row ``i`` belongs to the centre whose
    earliest stage-1 window starts at frame ``i``.
    """
    w = weights or sbn_weights(spec, seed)
    if utterance.fmaps != spec.input_maps or utterance.freq != spec.input_freq:
        raise ShapeError(f"utterance {utterance.shape} does not match SBN input")
    rf = spec.receptive_field
    if utterance.time < rf:
        raise InputTooShortError(f"utterance of {utterance.time} frames shorter than SBN context {rf}")
    lead = -spec.offsets[0]
    rows = []
    for i in range(utterance.time - rf + 1):
        centre = i + lead
        feats = np.stack(
            [stage1_bottleneck(w, spec, utterance, centre + off) for off in spec.offsets], axis=1
        )  # bottleneck x taps
        rows.append(_dnn(w.stage2, feats.reshape(-1)))
    return np.stack(rows)
