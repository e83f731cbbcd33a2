"""Time the numba and numpy kernel backends, and dense vs spliced evaluation.

    python benchmarks/bench_kernels.py [--repeat N]

Backends are compared on identical inputs; outputs are checked bit-equal
before any timing is reported.
"""
import argparse
import time

import numpy as np

from timedil import kernels
from timedil.densify import densify
from timedil.graph import build_table1
from timedil.oracle import eval_dense, eval_spliced
from timedil.tensor import seeded_random

CASES = {
    "conv 64x32x200 k3 d2": ("conv2d", (64, 32, 200), (64, 64, 3, 3), dict(dil_f=1, dil_t=2, stride_t=1)),
    "conv 3x64x500 k7": ("conv2d", (3, 64, 500), (64, 3, 7, 7), dict(dil_f=1, dil_t=1, stride_t=1)),
    "pool 64x64x500 2x2 d2": ("maxpool", (64, 64, 500), None, dict(size_f=2, size_t=2, stride_f=2, stride_t=1, dil_t=2)),
}


def best_of(fn, repeat):
    fn()  # warm-up, includes any JIT compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_rows(repeat):
    rng = np.random.default_rng(0)
    for name, (kind, xshape, wshape, kw) in CASES.items():
        x = rng.uniform(-1, 1, xshape).astype(np.float32)
        if kind == "conv2d":
            w = rng.uniform(-1, 1, wshape).astype(np.float32)
            b = rng.uniform(-1, 1, wshape[0]).astype(np.float32)
            args = (x, w, b, kw["dil_f"], kw["dil_t"], kw["stride_t"])
        else:
            args = (x, kw["size_f"], kw["size_t"], kw["stride_f"], kw["stride_t"], kw["dil_t"])
        outs, secs = {}, {}
        for backend, table in kernels.BACKENDS.items():
            fn = table[kind]
            outs[backend] = fn(*args)
            secs[backend] = best_of(lambda: fn(*args), repeat)
        same = outs["numba"].tobytes() == outs["numpy"].tobytes()
        yield name, secs["numba"], secs["numpy"], same


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--frames", type=int, default=300, help="utterance length for the table1 run")
    args = ap.parse_args()

    print(f"{'case':<26}{'numba s':>10}{'numpy s':>10}{'speedup':>9}  bit-equal")
    for name, t_nb, t_np, same in kernel_rows(args.repeat):
        print(f"{name:<26}{t_nb:>10.4f}{t_np:>10.4f}{t_np / t_nb:>9.1f}  {same}")

    net = build_table1(64, seed=0)
    dense, _ = densify(net)
    u = seeded_random(3, 64, args.frames, 1)
    t_dense = best_of(lambda: eval_dense(dense, u), 1)
    t_spliced = best_of(lambda: eval_spliced(net, u), 1)
    print(f"\ntable1 (64 outputs), {args.frames} frames, {args.frames - 47} positions")
    print(f"  spliced {t_spliced:.2f}s  dense {t_dense:.2f}s  ratio {t_spliced / t_dense:.1f}")


if __name__ == "__main__":
    main()
