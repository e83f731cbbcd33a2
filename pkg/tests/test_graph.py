import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from timedil.densify import densify
from timedil.errors import InputTooShortError, ShapeError
from timedil.generate import random_windowed_net
from timedil.graph import (
    DENSE,
    NetworkSpec,
    build_fig1_toy,
    build_table1,
    forward,
    infer_shapes,
    networks_equal,
    receptive_field_time,
)
from timedil.layers import ConvSpec, PoolSpec
from timedil.tensor import Tensor3, seeded_random, zeros

# Right-hand column of the architecture table, conv/pool rows only.
TABLE1_CONV_SHAPES = [
    (64, 64, 42), (64, 32, 42),
    (64, 32, 40), (64, 32, 38), (64, 32, 36), (64, 16, 36),
    (128, 16, 34), (128, 16, 32), (128, 16, 30), (128, 8, 30),
    (256, 8, 28), (256, 8, 26), (256, 8, 24), (256, 4, 12),
    (512, 4, 10), (512, 4, 8), (512, 4, 6), (512, 2, 3),
]


@pytest.fixture(scope="module")
def table1_small():
    return build_table1(64, seed=0)


def _conv_pool_shapes(net):
    trace = infer_shapes(net)
    return [s for l, s in zip(net.layers, trace.shapes) if isinstance(l, (ConvSpec, PoolSpec))]


def test_table1_shapes(table1_small):
    assert _conv_pool_shapes(table1_small) == TABLE1_CONV_SHAPES
    fc_dims = [s[0] for l, s in zip(table1_small.layers, infer_shapes(table1_small).shapes)
               if type(l).__name__ == "FullyConnectedSpec"]
    assert fc_dims == [2048, 2048, 2048, 1024, 64]


def test_table1_frequency_halves(table1_small):
    freqs = []
    for shape in _conv_pool_shapes(table1_small):
        if not freqs or freqs[-1] != shape[1]:
            freqs.append(shape[1])
    assert freqs == [64, 32, 16, 8, 4, 2]


def test_fig1_toy_shapes():
    net = build_fig1_toy()
    assert [s[2] for s in infer_shapes(net).shapes] == [6, 3, 1]


def test_table1_rejects_47_frames(table1_small):
    with pytest.raises(ShapeError) as err:
        infer_shapes(table1_small, (3, 64, 47))
    # 47 frames leave a 512x2x2 map: the first FC sees 2048 inputs, not 3072
    assert err.value.layer_index == 45


def test_windowed_window_must_be_consumed(table1_small):
    # 49 frames still pass every layer but the last frame is never read
    with pytest.raises(ShapeError, match="not fully consumed"):
        infer_shapes(table1_small, (3, 64, 49))


def test_receptive_fields(table1_small):
    assert receptive_field_time(build_fig1_toy()) == 8
    assert receptive_field_time(table1_small) == 48
    conv3 = ConvSpec(np.zeros((1, 1, 1, 3)), np.zeros(1))
    assert receptive_field_time(NetworkSpec((1, 1, 3), [conv3])) == 3


def test_build_is_deterministic():
    assert networks_equal(build_table1(8, seed=3), build_table1(8, seed=3))
    assert not networks_equal(build_table1(8, seed=3), build_table1(8, seed=4))


def test_forward_zero_weights_gives_zero_output(table1_small):
    layers = []
    for l in table1_small.layers:
        if hasattr(l, "weights"):
            l = type(l)(**{**{k: getattr(l, k) for k in l.__dataclass_fields__},
                           "weights": np.zeros_like(l.weights), "bias": np.zeros_like(l.bias)})
        layers.append(l)
    net = table1_small.replace(layers=layers)
    out = forward(net, seeded_random(3, 64, 48, 1))
    assert out.shape == (64, 1, 1)
    assert not out.data.any()


def test_table1_full_width_output():
    out = forward(build_table1(), seeded_random(3, 64, 48, 0))
    assert out.shape == (32000, 1, 1)
    assert np.isfinite(out.data).all()


def test_fig1_hand_computed_ramp():
    one = np.ones(1, np.float32)
    c1 = ConvSpec(np.ones((1, 1, 1, 3), np.float32), 0 * one)
    c2 = ConvSpec(np.array([1, -1, 2], np.float32).reshape(1, 1, 1, 3), 0.5 * one)
    net = NetworkSpec((1, 1, 8), [c1, PoolSpec(1, 2, 1, 2), c2])
    ramp = Tensor3(np.arange(8, dtype=np.float32).reshape(1, 1, 8))
    # conv: 3 6 9 12 15 18 -> pool: 6 12 18 -> 6 - 12 + 36 + 0.5
    assert forward(net, ramp).data.tolist() == [30.5]


def test_forward_input_checks(table1_small):
    with pytest.raises(ShapeError):
        forward(table1_small, zeros(3, 64, 50))
    with pytest.raises(ShapeError):
        forward(table1_small, zeros(2, 64, 48))
    dense, _ = densify(build_fig1_toy())
    with pytest.raises(InputTooShortError):
        forward(dense, zeros(1, 1, 7))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_forward_shape_matches_inference(seed):
    net = random_windowed_net(seed)
    x = seeded_random(*net.input_shape, seed)
    out = forward(net, x)
    predicted = infer_shapes(net).output
    assert out.data.size == int(np.prod(predicted))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 30))
def test_dense_output_length_property(seed, extra):
    net = random_windowed_net(seed)
    dense, _ = densify(net)
    assert dense.mode == DENSE
    rf = receptive_field_time(net)
    m, f, _ = net.input_shape
    out = forward(dense, seeded_random(m, f, rf + extra, seed))
    assert out.time == rf + extra - rf + 1


def test_weightless_table1_has_same_structure():
    a = build_table1(8, seed=0)
    b = build_table1(8, seed=0, with_weights=False)
    assert infer_shapes(a).shapes == infer_shapes(b).shapes
    assert all(not getattr(l, "weights", np.zeros(1)).any() for l in b.layers)
