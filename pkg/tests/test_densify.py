from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from timedil.densify import convolutionalize, dense_output_length, densify, time_stride_product
from timedil.errors import AlreadyDenseError, InputTooShortError, UnsupportedFeatureError
from timedil.generate import random_windowed_net
from timedil.graph import DENSE, NetworkSpec, build_fig1_toy, build_table1, forward, receptive_field_time, trace_shapes
from timedil.layers import ConvSpec, Flatten, FullyConnectedSpec, PoolSpec
from timedil.oracle import eval_dense, eval_spliced
from timedil.tensor import seeded_random


@pytest.fixture(scope="module")
def table1():
    return build_table1(64, seed=0)


def test_fig1_rewrite():
    net = build_fig1_toy(0)
    dense, report = densify(net)
    c1, pool, c2 = dense.layers
    assert (c1.dilation_t, pool.stride_t, pool.size_t, c2.dilation_t) == (1, 1, 2, 2)
    assert [r.new_dilation_t for r in report.rewrites if r.kind == "conv"] == [1, 2]
    assert report.receptive_field_before == report.receptive_field_after == 8


def test_table1_rewrite(table1):
    dense, report = densify(table1)
    convs = [(i, l) for i, l in enumerate(dense.layers) if isinstance(l, ConvSpec)]
    dil = [l.dilation_t for _, l in convs]
    # 13 convs; only the two 2x2 pools stride in time
    assert dil[:10] == [1] * 10
    assert dil[10:13] == [2, 2, 2]
    assert dil[13:] == [4] * 5
    head = convs[13][1]
    assert (head.in_maps, head.kernel_f, head.kernel_t) == (512, 2, 3)
    assert all((l.kernel_f, l.kernel_t) == (1, 1) for _, l in convs[14:])
    pools = [l for l in dense.layers if isinstance(l, PoolSpec)]
    assert [p.stride_t for p in pools] == [1] * 5
    assert [p.stride_f for p in pools] == [2] * 5  # frequency untouched
    assert [p.dilation_t for p in pools] == [1, 1, 1, 1, 2]
    assert receptive_field_time(dense) == 48


def test_cumulative_factor_is_power_of_stride(table1):
    _, report = densify(table1)
    n_time_pools = 0
    for r in report.rewrites:
        if r.kind == "pool" and r.old_stride_t == 2:
            n_time_pools += 1
        assert r.factor_after == 2**n_time_pools


def test_no_time_pooling_only_converts_fc():
    rs_net = build_table1(4, seed=0)
    layers = [PoolSpec(l.size_f, 1, l.stride_f, 1) if isinstance(l, PoolSpec) else l for l in rs_net.layers]
    flat_idx = next(i for i, l in enumerate(layers) if isinstance(l, Flatten))
    pre = trace_shapes(NetworkSpec((3, 64, 48), layers[:flat_idx])).shapes[-1]
    fc = layers[flat_idx + 1]
    dim = pre[0] * pre[1] * pre[2]
    layers[flat_idx + 1] = FullyConnectedSpec(np.zeros((fc.out_dim, dim), np.float32), fc.bias)
    net = NetworkSpec((3, 64, 48), layers)
    dense, report = densify(net)
    assert all(r.new_dilation_t == r.old_dilation_t for r in report.rewrites)
    assert [c.dilation_t for c in report.fc_conversions] == [1] * 5


def test_weights_are_only_reindexed(table1):
    dense, _ = densify(table1)

    def multiset(net):
        c = Counter()
        for l in net.layers:
            if hasattr(l, "weights"):
                c.update(l.weights.reshape(-1).view(np.uint32).tolist()[:5000])
                c.update(l.bias.view(np.uint32).tolist())
        return c

    assert multiset(dense) == multiset(table1)
    fc = next(l for l in table1.layers if isinstance(l, FullyConnectedSpec))
    head = dense.layers[[i for i, l in enumerate(table1.layers) if l is fc][0] - 1]
    assert head.weights.reshape(fc.out_dim, -1).tobytes() == fc.weights.tobytes()


def test_fc_reindexing_pins_flatten_order():
    """One window evaluated through FC and through the converted conv."""
    net = random_windowed_net(11)
    while not any(isinstance(l, FullyConnectedSpec) for l in net.layers):
        net = random_windowed_net(net.input_shape[2] + 1000)
    x = seeded_random(*net.input_shape, 4)
    dense, _ = densify(net)
    a = forward(net, x).data
    b = forward(dense, x).data
    assert a.tobytes() == b.tobytes()


def test_already_dense_is_error():
    dense, _ = densify(build_fig1_toy())
    with pytest.raises(AlreadyDenseError):
        densify(dense)


def test_conv_time_stride_unsupported():
    conv = ConvSpec(np.ones((1, 1, 1, 2), np.float32), np.zeros(1, np.float32), stride_t=2)
    net = NetworkSpec((1, 1, 4), [conv, ConvSpec(np.ones((1, 1, 1, 2)), np.zeros(1))])
    with pytest.raises(UnsupportedFeatureError):
        densify(net)


def test_input_net_untouched(table1):
    before = [getattr(l, "dilation_t", None) for l in table1.layers]
    densify(table1)
    assert [getattr(l, "dilation_t", None) for l in table1.layers] == before


def test_dense_output_length(table1):
    dense, _ = densify(table1)
    assert dense_output_length(dense, 148) == 101
    assert dense_output_length(dense, 48) == 1
    with pytest.raises(InputTooShortError):
        dense_output_length(dense, 47)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6))
def test_dilation_bookkeeping_property(seed):
    net = random_windowed_net(seed)
    dense, report = densify(net)
    factor = 1
    by_index = {r.index: r for r in report.rewrites}
    for idx, layer in enumerate(net.layers):
        if isinstance(layer, ConvSpec):
            assert by_index[idx].new_dilation_t == layer.dilation_t * factor
        if isinstance(layer, PoolSpec):
            assert by_index[idx].new_dilation_t == layer.dilation_t * factor
            factor *= layer.stride_t
    assert all(c.dilation_t == factor for c in report.fc_conversions)
    assert receptive_field_time(dense) == receptive_field_time(net)


def test_strided_diagnostic_downsamples_by_4(table1):
    strided = convolutionalize(table1)
    assert time_stride_product(table1) == 4
    u = seeded_random(3, 64, 148, 5)
    out = eval_dense(strided, u)
    dense_out = eval_dense(densify(table1)[0], u)
    assert len(dense_out) == 101
    assert len(out) == 26  # ceil(101 / 4)
    assert out.tobytes() == dense_out[::4].tobytes()


def test_fig1_padded_utterance_lengths():
    # an utterance of 10 padded to 16 gives 16 - 8 + 1 valid outputs
    net = build_fig1_toy(0)
    u = seeded_random(1, 1, 16, 0)
    assert len(eval_spliced(net, u)) == 9
    assert len(eval_dense(densify(net)[0], u)) == 9
