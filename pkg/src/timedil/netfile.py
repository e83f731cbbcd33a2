"""Text format for network descriptions.

::

    timedil-network 1
    input 3 64 48
    mode windowed
    conv dilation_f=1 dilation_t=1 pad_f=3 stride_t=1 weights=64,3,7,7:<base64> bias=64:<base64>
    pool size_f=2 size_t=1 stride_f=2 stride_t=1 dilation_t=1
    batchnorm epsilon=1e-05 mean=64:<base64> variance=... scale=... shift=...
    relu
    flatten
    fc weights=2048,3072:<base64> bias=2048:<base64>

One entry per line; ``#`` starts a comment line. Arrays are little-endian
float32 written as ``dims:base64``. A single ``sbn key=value ...`` entry may
replace ``input``/``mode`` and the layer lines; it expands to the CNN form.
"""
from __future__ import annotations

import base64
import binascii
import re

import numpy as np

from .errors import NetworkSemanticError, NetworkSyntaxError, ShapeError
from .graph import MODES, NetworkSpec, infer_shapes
from .layers import Activation, BatchNormSpec, ConvSpec, Flatten, FullyConnectedSpec, PoolSpec
from .sbn import SbnSpec, build_sbn_as_cnn

MAGIC = "timedil-network"
VERSION = 1

_LAYER_KEYS = {
    "conv": ({"weights", "bias"}, {"dilation_f", "dilation_t", "pad_f", "stride_t"}),
    "pool": (set(), {"size_f", "size_t", "stride_f", "stride_t", "dilation_t"}),
    "batchnorm": ({"mean", "variance", "scale", "shift"}, {"epsilon"}),
    "fc": ({"weights", "bias"}, set()),
    "relu": (set(), set()),
    "flatten": (set(), set()),
}
_REQUIRED_INT = {"pool": {"size_f", "size_t", "stride_f", "stride_t"}}
_SBN_KEYS = {
    "input_maps", "input_freq", "window", "hidden1", "bottleneck",
    "hidden2", "outputs", "offsets", "aux_outputs", "seed",
}


def _blob(arr) -> str:
    arr = np.ascontiguousarray(arr, dtype="<f4")
    dims = ",".join(str(d) for d in arr.shape)
    return f"{dims}:{base64.b64encode(arr.tobytes()).decode('ascii')}"


def _fmt(v) -> str:
    if isinstance(v, np.ndarray):
        return _blob(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _layer_line(layer) -> str:
    if isinstance(layer, ConvSpec):
        fields = dict(dilation_f=layer.dilation_f, dilation_t=layer.dilation_t, pad_f=layer.pad_f,
                      stride_t=layer.stride_t, weights=layer.weights, bias=layer.bias)
        name = "conv"
    elif isinstance(layer, PoolSpec):
        fields = dict(size_f=layer.size_f, size_t=layer.size_t, stride_f=layer.stride_f,
                      stride_t=layer.stride_t, dilation_t=layer.dilation_t)
        name = "pool"
    elif isinstance(layer, BatchNormSpec):
        fields = dict(epsilon=layer.epsilon, mean=layer.mean, variance=layer.variance,
                      scale=layer.scale, shift=layer.shift)
        name = "batchnorm"
    elif isinstance(layer, FullyConnectedSpec):
        fields = dict(weights=layer.weights, bias=layer.bias)
        name = "fc"
    elif isinstance(layer, Activation):
        return "relu"
    elif isinstance(layer, Flatten):
        return "flatten"
    else:
        raise TypeError(f"cannot serialize {type(layer).__name__}")
    return " ".join([name] + [f"{k}={_fmt(v)}" for k, v in fields.items()])


def serialize_network(net: NetworkSpec) -> str:
    lines = [
        f"{MAGIC} {VERSION}",
        "input " + " ".join(str(d) for d in net.input_shape),
        f"mode {net.mode}",
    ]
    lines.extend(_layer_line(l) for l in net.layers)
    return "\n".join(lines) + "\n"


def _tokens(line):
    return [(m.group(0), m.start() + 1) for m in re.finditer(r"\S+", line)]


class _Parser:
    def __init__(self, text):
        self.lines = text.splitlines()

    def fail(self, msg, lineno, col=1):
        raise NetworkSyntaxError(msg, lineno, col)

    def parse_int(self, tok, lineno, col, minimum=0):
        if not re.fullmatch(r"-?\d+", tok):
            self.fail(f"expected an integer, got {tok!r}", lineno, col)
        v = int(tok)
        if v < minimum:
            self.fail(f"value {v} below minimum {minimum}", lineno, col)
        return v

    def parse_blob(self, tok, lineno, col):
        dims_txt, sep, payload = tok.partition(":")
        if not sep or not re.fullmatch(r"\d+(,\d+)*", dims_txt):
            self.fail("array must be written as dims:base64", lineno, col)
        dims = tuple(int(d) for d in dims_txt.split(","))
        try:
            raw = base64.b64decode(payload, validate=True)
        except (binascii.Error, ValueError):
            self.fail("invalid base64 payload", lineno, col)
        if len(raw) != 4 * int(np.prod(dims)):
            self.fail(f"payload holds {len(raw)} bytes, dims {dims} need {4 * int(np.prod(dims))}", lineno, col)
        return np.frombuffer(raw, dtype="<f4").astype(np.float32).reshape(dims)

    def key_values(self, toks, lineno, allowed):
        out = {}
        for tok, col in toks:
            key, sep, value = tok.partition("=")
            if not sep or not key:
                self.fail(f"expected key=value, got {tok!r}", lineno, col)
            if key not in allowed:
                self.fail(f"unknown key {key!r}", lineno, col)
            if key in out:
                self.fail(f"duplicate key {key!r}", lineno, col)
            out[key] = (value, col)
        return out

    def layer(self, name, toks, lineno):
        required, optional = _LAYER_KEYS[name]
        kv = self.key_values(toks, lineno, required | optional)
        for key in sorted(required | _REQUIRED_INT.get(name, set())):
            if key not in kv:
                self.fail(f"{name} entry missing {key!r}", lineno, len(name) + 1)
        arrays = {k: self.parse_blob(v, lineno, c) for k, (v, c) in kv.items() if k in required}
        ints = {}
        floats = {}
        for k, (v, c) in kv.items():
            if k in required:
                continue
            if k == "epsilon":
                try:
                    floats[k] = float(v)
                except ValueError:
                    self.fail(f"expected a real number, got {v!r}", lineno, c)
            else:
                ints[k] = self.parse_int(v, lineno, c)
        try:
            if name == "conv":
                return ConvSpec(arrays["weights"], arrays["bias"], **ints)
            if name == "pool":
                return PoolSpec(**ints)
            if name == "batchnorm":
                return BatchNormSpec(**arrays, **floats)
            if name == "fc":
                return FullyConnectedSpec(arrays["weights"], arrays["bias"])
        except ShapeError as exc:
            self.fail(str(exc), lineno, 1)
        return Activation() if name == "relu" else Flatten()

    def sbn(self, toks, lineno):
        kv = self.key_values(toks, lineno, _SBN_KEYS)
        args = {}
        seed = 0
        for k, (v, c) in kv.items():
            if k in ("hidden1", "hidden2", "offsets"):
                parts = v.split(",") if v else []
                args[k] = tuple(self.parse_int(p, lineno, c, minimum=-(2**31)) for p in parts)
            elif k == "seed":
                seed = self.parse_int(v, lineno, c)
            else:
                args[k] = self.parse_int(v, lineno, c)
        try:
            return build_sbn_as_cnn(SbnSpec(**args), seed)
        except ShapeError as exc:
            raise NetworkSemanticError(f"sbn entry: {exc.detail}") from None

    def parse(self):
        header = None
        input_shape = None
        mode = None
        layers = []
        sbn_net = None
        for lineno, raw in enumerate(self.lines, 1):
            toks = _tokens(raw)
            if not toks or toks[0][0].startswith("#"):
                continue
            word, col = toks[0]
            rest = toks[1:]
            if header is None:
                if word != MAGIC or len(rest) != 1:
                    self.fail(f"expected header '{MAGIC} {VERSION}'", lineno, col)
                header = self.parse_int(rest[0][0], lineno, rest[0][1])
                if header != VERSION:
                    self.fail(f"unsupported format version {header}", lineno, rest[0][1])
                continue
            if sbn_net is not None:
                self.fail("no entries allowed after an sbn entry", lineno, col)
            if word == "input":
                if input_shape is not None or len(rest) != 3:
                    self.fail("input takes exactly three dimensions, once", lineno, col)
                input_shape = tuple(self.parse_int(t, lineno, c, minimum=1) for t, c in rest)
            elif word == "mode":
                if mode is not None or len(rest) != 1 or rest[0][0] not in MODES:
                    self.fail(f"mode must be one of {', '.join(MODES)}", lineno, col)
                mode = rest[0][0]
            elif word == "sbn":
                if input_shape is not None or mode is not None or layers:
                    self.fail("sbn entry cannot be combined with other entries", lineno, col)
                sbn_net = self.sbn(rest, lineno)
            elif word in _LAYER_KEYS:
                if input_shape is None or mode is None:
                    self.fail("input and mode must precede layers", lineno, col)
                layers.append(self.layer(word, rest, lineno))
            else:
                self.fail(f"unknown entry {word!r}", lineno, col)
        if header is None:
            self.fail("empty network description", 1, 1)
        if sbn_net is not None:
            return sbn_net
        if input_shape is None or mode is None:
            self.fail("missing input or mode entry", len(self.lines) or 1, 1)
        return NetworkSpec(input_shape, layers, mode)


def parse_network(text: str) -> NetworkSpec:
    """Parse and shape-check a description.

    Raises :class:`NetworkSyntaxError` (with line and column) for malformed
    text and :class:`NetworkSemanticError` (with layer index) when shape
    inference fails.
    """
    net = _Parser(text).parse()
    try:
        infer_shapes(net)
    except ShapeError as exc:
        raise NetworkSemanticError(exc.detail, exc.layer_index) from None
    return net


def load_network(path) -> NetworkSpec:
    with open(path, encoding="ascii") as fh:
        return parse_network(fh.read())


def save_network(net: NetworkSpec, path):
    with open(path, "w", encoding="ascii") as fh:
        fh.write(serialize_network(net))
