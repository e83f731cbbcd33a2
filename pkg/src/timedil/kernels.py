"""Engine kernels over single (maps, freq, time) arrays.

Every kernel exists twice: a numba loop nest and a numpy version that
vectorizes over the output positions. For each output element both add the
products ``weight * input`` one at a time, starting from zero, in the order
input map (outer), frequency tap, time tap (inner), and add the bias last.
Neither uses fma or reassociation, so the two agree to the bit.
"""
import numpy as np

from . import _accel
from ._accel import njit


def conv_out_len(n, kernel, dilation, stride=1):
    return (n - (kernel - 1) * dilation - 1) // stride + 1


# --- convolution -----------------------------------------------------------


def conv2d_numpy(x, w, b, dil_f, dil_t, stride_t):
    n_out, n_in, k_f, k_t = w.shape
    f_out = conv_out_len(x.shape[1], k_f, dil_f)
    t_out = conv_out_len(x.shape[2], k_t, dil_t, stride_t)
    span = (t_out - 1) * stride_t + 1
    out = np.zeros((n_out, f_out, t_out), dtype=np.float32)
    for c in range(n_in):
        for i in range(k_f):
            rows = x[c, i * dil_f : i * dil_f + f_out]
            for j in range(k_t):
                t0 = j * dil_t
                out += w[:, c, i, j, None, None] * rows[None, :, t0 : t0 + span : stride_t]
    out += b[:, None, None]
    return out


@njit
def conv2d_numba(x, w, b, dil_f, dil_t, stride_t):
    n_out, n_in, k_f, k_t = w.shape
    f_out = x.shape[1] - (k_f - 1) * dil_f
    t_out = (x.shape[2] - (k_t - 1) * dil_t - 1) // stride_t + 1
    out = np.zeros((n_out, f_out, t_out), dtype=np.float32)
    for o in range(n_out):
        for c in range(n_in):
            for i in range(k_f):
                for j in range(k_t):
                    wv = w[o, c, i, j]
                    t0 = j * dil_t
                    for f in range(f_out):
                        src = x[c, f + i * dil_f]
                        dst = out[o, f]
                        for t in range(t_out):
                            dst[t] += wv * src[t0 + t * stride_t]
        bo = b[o]
        for f in range(f_out):
            for t in range(t_out):
                out[o, f, t] += bo
    return out


# --- max pooling -----------------------------------------------------------


def maxpool_numpy(x, size_f, size_t, stride_f, stride_t, dil_t):
    n, freq, time = x.shape
    f_out = (freq - size_f) // stride_f + 1
    t_out = conv_out_len(time, size_t, dil_t, stride_t)
    f_span = (f_out - 1) * stride_f + 1
    t_span = (t_out - 1) * stride_t + 1
    out = None
    for i in range(size_f):
        for j in range(size_t):
            t0 = j * dil_t
            win = x[:, i : i + f_span : stride_f, t0 : t0 + t_span : stride_t]
            out = win.copy() if out is None else np.maximum(out, win)
    return out


@njit
def maxpool_numba(x, size_f, size_t, stride_f, stride_t, dil_t):
    n, freq, time = x.shape
    f_out = (freq - size_f) // stride_f + 1
    t_out = (time - (size_t - 1) * dil_t - 1) // stride_t + 1
    out = np.empty((n, f_out, t_out), dtype=np.float32)
    for m in range(n):
        for f in range(f_out):
            for t in range(t_out):
                best = x[m, f * stride_f, t * stride_t]
                for i in range(size_f):
                    for j in range(size_t):
                        v = x[m, f * stride_f + i, t * stride_t + j * dil_t]
                        if v > best:
                            best = v
                out[m, f, t] = best
    return out


# --- fully connected -------------------------------------------------------


def fully_connected_numpy(x, w, b):
    out = np.zeros(w.shape[0], dtype=np.float32)
    for i in range(w.shape[1]):
        out += w[:, i] * x[i]
    out += b
    return out


@njit
def fully_connected_numba(x, w, b):
    n_out, n_in = w.shape
    out = np.empty(n_out, dtype=np.float32)
    for o in range(n_out):
        acc = np.float32(0.0)
        for i in range(n_in):
            acc += w[o, i] * x[i]
        out[o] = acc + b[o]
    return out


def _select(numba_fn, numpy_fn):
    return numba_fn if _accel.USE_NUMBA else numpy_fn


conv2d = _select(conv2d_numba, conv2d_numpy)
maxpool = _select(maxpool_numba, maxpool_numpy)
fully_connected = _select(fully_connected_numba, fully_connected_numpy)

BACKENDS = {
    "numba": {"conv2d": conv2d_numba, "maxpool": maxpool_numba, "fully_connected": fully_connected_numba},
    "numpy": {"conv2d": conv2d_numpy, "maxpool": maxpool_numpy, "fully_connected": fully_connected_numpy},
}
