"""Random windowed architectures for property checks and benchmarks."""
from __future__ import annotations

import numpy as np

from .graph import WINDOWED, NetworkSpec, random_batchnorm, random_conv, random_fc
from .layers import Activation, Flatten, PoolSpec
from .tensor import RandomStream


def random_windowed_net(seed, max_pools=3, max_kernel=5, max_maps=4, max_freq=6) -> NetworkSpec:
    """A small windowed CNN with 1..max_pools stride-2 time pools.

    Architecture choices come from ``numpy.random.default_rng(seed)``, weights
    from the package's SplitMix64 stream with the same seed. The declared
    window equals the receptive field, so the net is always well formed.
    """
    rng = np.random.default_rng(seed)
    rs = RandomStream(seed)
    maps = int(rng.integers(1, 4))
    freq = int(rng.integers(1, max_freq + 1))
    in_shape_mf = (maps, freq)
    layers = []

    def add_conv():
        nonlocal maps, freq
        k_f = int(rng.integers(1, min(3, freq + 2) + 1))
        pad = int(rng.integers(0, k_f)) if k_f > 1 else 0
        if freq + 2 * pad < k_f:
            pad = (k_f - freq + 1) // 2
        out_maps = int(rng.integers(1, max_maps + 1))
        k_t = int(rng.integers(1, max_kernel + 1))
        dil = int(rng.choice([1, 1, 1, 2]))
        layers.append(random_conv(rs, maps, out_maps, k_f, k_t, pad_f=pad, dilation_t=dil))
        maps, freq = out_maps, freq + 2 * pad - k_f + 1
        if rng.random() < 0.5:
            layers.append(random_batchnorm(rs, maps))
        if rng.random() < 0.7:
            layers.append(Activation())

    n_pools = int(rng.integers(1, max_pools + 1))
    for _ in range(n_pools):
        for _ in range(int(rng.integers(0, 3))):
            add_conv()
        size_t = int(rng.integers(2, 4))
        size_f = 2 if freq >= 2 and rng.random() < 0.5 else 1
        layers.append(PoolSpec(size_f, size_t, size_f, 2))
        freq = (freq - size_f) // size_f + 1
    for _ in range(int(rng.integers(0, 3))):
        add_conv()

    if rng.random() < 0.7:
        t_last = int(rng.integers(1, 4))
        layers.append(Flatten())
        dim = maps * freq * t_last
        for k in range(int(rng.integers(1, 3))):
            width = int(rng.integers(2, 9))
            if k:
                layers.extend([random_batchnorm(rs, dim), Activation()])
            layers.append(random_fc(rs, dim, width))
            dim = width
    else:
        t_last = 1

    extent = t_last
    for layer in reversed(layers):
        if hasattr(layer, "extent_t"):
            extent = (extent - 1) * layer.stride_t + layer.extent_t
    return NetworkSpec(in_shape_mf + (extent,), layers, WINDOWED)
