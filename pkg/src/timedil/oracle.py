"""Sliding-window reference evaluation and the dense-vs-spliced harness.

The spliced path shares no kernel with the engine. It cuts the utterance
into one window per start frame, stacks the windows along a trailing batch
axis (``maps x freq x time x window``) and runs its own direct loops over
that layout. Per output element it accumulates in the same documented order
as the engine, so in the default mode both paths must agree exactly.
"""
from __future__ import annotations

import time as _time
from dataclasses import dataclass

import numpy as np

from . import _accel
from ._accel import njit
from .densify import densify
from .errors import InputTooShortError, ShapeError
from .graph import DENSE, WINDOWED, NetworkSpec, forward, infer_shapes, output_vectors, receptive_field_time
from .layers import Activation, BatchNormSpec, ConvSpec, Flatten, FullyConnectedSpec, PoolSpec
from .tensor import Tensor3

# --- batch-last reference kernels ----------------------------------------------


@njit
def _conv_batch_numba(x, w, b, dil_f, dil_t):
    n_out, n_in, k_f, k_t = w.shape
    f_out = x.shape[1] - (k_f - 1) * dil_f
    t_out = x.shape[2] - (k_t - 1) * dil_t
    batch = x.shape[3]
    y = np.empty((n_out, f_out, t_out, batch), dtype=np.float32)
    acc = np.empty(batch, dtype=np.float32)
    for o in range(n_out):
        for f in range(f_out):
            for t in range(t_out):
                acc[:] = 0
                for c in range(n_in):
                    for i in range(k_f):
                        for j in range(k_t):
                            wv = w[o, c, i, j]
                            src = x[c, f + i * dil_f, t + j * dil_t]
                            for n in range(batch):
                                acc[n] += wv * src[n]
                for n in range(batch):
                    y[o, f, t, n] = acc[n] + b[o]
    return y


def _conv_batch_numpy(x, w, b, dil_f, dil_t):
    n_out, n_in, k_f, k_t = w.shape
    f_out = x.shape[1] - (k_f - 1) * dil_f
    t_out = x.shape[2] - (k_t - 1) * dil_t
    # im2col-style gather, then a sequential sweep over the column axis
    fi = np.arange(f_out)[:, None] + np.arange(k_f)[None, :] * dil_f
    ti = np.arange(t_out)[:, None] + np.arange(k_t)[None, :] * dil_t
    y = np.zeros((n_out, f_out, t_out, x.shape[3]), dtype=np.float32)
    for c in range(n_in):
        cols = x[c][fi[:, :, None, None], ti[None, None, :, :]]  # f_out,k_f,t_out,k_t,batch
        for i in range(k_f):
            for j in range(k_t):
                y += w[:, c, i, j, None, None, None] * cols[None, :, i, :, j, :]
    y += b[:, None, None, None]
    return y


@njit
def _pool_batch_numba(x, size_f, size_t, stride_f, stride_t):
    maps, freq, time, batch = x.shape
    f_out = (freq - size_f) // stride_f + 1
    t_out = (time - size_t) // stride_t + 1
    y = np.empty((maps, f_out, t_out, batch), dtype=np.float32)
    for m in range(maps):
        for f in range(f_out):
            for t in range(t_out):
                for n in range(batch):
                    best = x[m, f * stride_f, t * stride_t, n]
                    for i in range(size_f):
                        for j in range(size_t):
                            v = x[m, f * stride_f + i, t * stride_t + j, n]
                            if v > best:
                                best = v
                    y[m, f, t, n] = best
    return y


def _pool_batch_numpy(x, size_f, size_t, stride_f, stride_t):
    maps, freq, time, batch = x.shape
    f_out = (freq - size_f) // stride_f + 1
    t_out = (time - size_t) // stride_t + 1
    y = np.full((maps, f_out, t_out, batch), -np.inf, dtype=np.float32)
    for fo in range(f_out):
        for to in range(t_out):
            win = x[:, fo * stride_f : fo * stride_f + size_f, to * stride_t : to * stride_t + size_t]
            y[:, fo, to] = win.reshape(maps, size_f * size_t, batch).max(axis=1)
    return y


@njit
def _fc_batch_numba(x, w, b):
    n_out, n_in = w.shape
    batch = x.shape[1]
    y = np.empty((n_out, batch), dtype=np.float32)
    acc = np.empty(batch, dtype=np.float32)
    for o in range(n_out):
        acc[:] = 0
        for i in range(n_in):
            wv = w[o, i]
            for n in range(batch):
                acc[n] += wv * x[i, n]
        for n in range(batch):
            y[o, n] = acc[n] + b[o]
    return y


def _fc_batch_numpy(x, w, b):
    y = np.zeros((w.shape[0], x.shape[1]), dtype=np.float32)
    for i in range(w.shape[1]):
        y += w[:, i, None] * x[i][None, :]
    y += b[:, None]
    return y


REFERENCE_BACKENDS = {
    "numba": (_conv_batch_numba, _pool_batch_numba, _fc_batch_numba),
    "numpy": (_conv_batch_numpy, _pool_batch_numpy, _fc_batch_numpy),
}


def _reference_kernels(backend):
    if backend is None:
        backend = _accel.backend_name()
    return REFERENCE_BACKENDS[backend]


def _windows(utterance: Tensor3, length):
    """Stack every ``length``-frame window as ``maps x freq x length x n``."""
    view = np.lib.stride_tricks.sliding_window_view(utterance.array, length, axis=2)
    # view: maps, freq, n, length
    return np.ascontiguousarray(view.transpose(0, 1, 3, 2))


def _run_windowed_batch(net: NetworkSpec, x, backend=None):
    conv, pool, fc = _reference_kernels(backend)
    flat = False
    for layer in net.layers:
        if isinstance(layer, ConvSpec):
            if layer.stride_t != 1:
                raise ShapeError("reference path does not support conv time strides")
            if layer.pad_f:
                x = np.pad(x, ((0, 0), (layer.pad_f, layer.pad_f), (0, 0), (0, 0)))
            x = conv(np.ascontiguousarray(x), layer.weights, layer.bias, layer.dilation_f, layer.dilation_t)
        elif isinstance(layer, PoolSpec):
            if layer.dilation_t != 1:
                raise ShapeError("reference path expects undilated pools")
            x = pool(np.ascontiguousarray(x), layer.size_f, layer.size_t, layer.stride_f, layer.stride_t)
        elif isinstance(layer, BatchNormSpec):
            mean, mult, shift = layer.factors()
            shape = (-1,) + (1,) * (x.ndim - 1)
            x = (x - mean.reshape(shape)) * mult.reshape(shape) + shift.reshape(shape)
        elif isinstance(layer, Activation):
            x = np.where(x > 0, x, np.float32(0))
        elif isinstance(layer, Flatten):
            x = x.reshape(-1, x.shape[-1])
            flat = True
        elif isinstance(layer, FullyConnectedSpec):
            x = fc(np.ascontiguousarray(x), layer.weights, layer.bias)
    if not flat:
        x = x.reshape(-1, x.shape[-1])
    return x.T  # windows x outputs


# --- public API -------------------------------------------------------------------


def eval_spliced(net: NetworkSpec, utterance: Tensor3, backend=None) -> np.ndarray:
    """One output vector per start frame, each from an independent window.

    Returns an ``n_windows x out_dim`` array.
    """
    if net.mode != WINDOWED:
        raise ShapeError(f"spliced evaluation needs a windowed net, got {net.mode}")
    infer_shapes(net)
    rf = receptive_field_time(net)
    m, f, _ = net.input_shape
    if utterance.fmaps != m or utterance.freq != f:
        raise ShapeError(f"utterance {utterance.shape} does not match network input {net.input_shape}")
    if utterance.time < rf:
        raise InputTooShortError(f"utterance of {utterance.time} frames shorter than receptive field {rf}")
    return np.ascontiguousarray(_run_windowed_batch(net, _windows(utterance, rf), backend))


def eval_dense(net: NetworkSpec, utterance: Tensor3) -> np.ndarray:
    """Dense forward pass reshaped to ``T_out x out_dim``."""
    if net.mode == WINDOWED:
        raise ShapeError("dense evaluation needs a dense net; densify it first")
    return np.ascontiguousarray(output_vectors(forward(net, utterance)))


@dataclass
class EquivalenceReport:
    positions: int
    max_abs_diff: float
    max_rel_diff: float
    argmax_agreement: float
    tolerance: float
    passed: bool
    spliced_seconds: float
    dense_seconds: float

    FIELDS = ("positions", "max_abs_diff", "max_rel_diff", "argmax_agreement", "tolerance", "passed")

    def to_text(self, timings=True) -> str:
        lines = [f"{k} {getattr(self, k)!r}" for k in self.FIELDS]
        if timings:
            lines.append(f"spliced_seconds {self.spliced_seconds:.3f}")
            lines.append(f"dense_seconds {self.dense_seconds:.3f}")
        return "\n".join(lines) + "\n"


def compare_outputs(spliced, dense, tolerance, spliced_seconds=0.0, dense_seconds=0.0):
    if spliced.shape != dense.shape:
        return EquivalenceReport(
            min(len(spliced), len(dense)), float("inf"), float("inf"), 0.0,
            tolerance, False, spliced_seconds, dense_seconds,
        )
    a = spliced.astype(np.float64)
    d = dense.astype(np.float64)
    diff = np.abs(a - d)
    max_abs = float(diff.max()) if diff.size else 0.0
    if not np.all(np.isfinite(diff)):
        max_abs = float("inf")
    denom = np.maximum(np.abs(a), np.abs(d))
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(denom > 0, diff / denom, 0.0)
    max_rel = float(rel.max()) if rel.size else 0.0
    agree = float(np.mean(np.argmax(spliced, axis=1) == np.argmax(dense, axis=1))) if len(a) else 1.0
    return EquivalenceReport(
        len(spliced), max_abs, max_rel, agree, tolerance,
        bool(max_abs <= tolerance), spliced_seconds, dense_seconds,
    )


def verify_equivalence(
    windowed: NetworkSpec, utterance: Tensor3, tolerance=0.0, dense=None, densify_fn=densify
) -> EquivalenceReport:
    """Certify a dense rewrite against sliding-window evaluation.

    ``dense`` supplies a prebuilt dense net (e.g. from a file); otherwise
    ``densify_fn(windowed)`` produces it.
    """
    if dense is None:
        dense = densify_fn(windowed)[0]
    if dense.mode != DENSE:
        raise ShapeError(f"expected a dense net, got {dense.mode}")
    t0 = _time.perf_counter()
    ref = eval_spliced(windowed, utterance)
    t1 = _time.perf_counter()
    try:
        out = eval_dense(dense, utterance)
    except InputTooShortError:
        out = np.zeros((0, ref.shape[1]), dtype=np.float32)
    t2 = _time.perf_counter()
    return compare_outputs(ref, out, tolerance, t1 - t0, t2 - t1)
