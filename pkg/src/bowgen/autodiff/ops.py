"""Differentiable operations used by the motion generator.

Sequence tensors are laid out ``(batch, time, channels)``; the time-axis
ops also accept unbatched ``(time, channels)`` input.
"""
import builtins
import functools

import numpy as np

from ..exceptions import InvalidInput, ShapeError
from .tensor import Tensor, as_tensor


def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


def _lift(x, like):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=like.data.dtype))


def _pair(a, b):
    if isinstance(a, Tensor):
        return a, _lift(b, a)
    b = as_tensor(b)
    return _lift(a, b), b


def _check_broadcast(a, b, op):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


# ----------------------------------------------------------------- elementwise

def add(a, b):
    a, b = _pair(a, b)
    _check_broadcast(a, b, "add")

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return Tensor._from_op(a.data + b.data, (a, b), backward, "add")


def sub(a, b):
    a, b = _pair(a, b)
    _check_broadcast(a, b, "sub")

    def backward(g):
        return _unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)

    return Tensor._from_op(a.data - b.data, (a, b), backward, "sub")


def mul(a, b):
    a, b = _pair(a, b)
    _check_broadcast(a, b, "mul")

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return Tensor._from_op(a.data * b.data, (a, b), backward, "mul")


def relu(x):
    mask = x.data > 0

    def backward(g):
        return (g * mask,)

    return Tensor._from_op(x.data * mask, (x,), backward, "relu")


def sigmoid(x):
    y = _sigmoid(x.data)

    def backward(g):
        return (g * y * (1 - y),)

    return Tensor._from_op(y, (x,), backward, "sigmoid")


def tanh(x):
    y = np.tanh(x.data)

    def backward(g):
        return (g * (1 - y * y),)

    return Tensor._from_op(y, (x,), backward, "tanh")


def _sigmoid(z):
    return 0.5 * (np.tanh(0.5 * z) + 1.0)


# ------------------------------------------------------------------ structural

def matmul(a, b):
    a, b = _pair(a, b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    try:
        out = a.data @ b.data
    except ValueError as e:
        raise ShapeError(f"matmul: {e}") from None

    def backward(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return Tensor._from_op(out, (a, b), backward, "matmul")


def linear(x, weight, bias=None):
    """``x @ weight + bias`` with ``weight`` shaped (in, out)."""
    out = matmul(x, weight)
    return add(out, bias) if bias is not None else out


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    ref = tensors[0].data
    ax = axis % ref.ndim
    for t in tensors[1:]:
        if t.ndim != ref.ndim or any(
            t.shape[i] != ref.shape[i] for i in range(ref.ndim) if i != ax
        ):
            raise ShapeError(f"concat: shapes {[t.shape for t in tensors]} differ off axis {axis}")
    sizes = [t.shape[ax] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=ax))

    dtype = np.result_type(*[t.data for t in tensors])
    data = np.concatenate([t.data.astype(dtype, copy=False) for t in tensors], axis=ax)
    return Tensor._from_op(data, tensors, backward, "concat")


def _is_basic_index(idx):
    items = idx if isinstance(idx, tuple) else (idx,)
    return all(isinstance(i, (builtins.slice, int, np.integer)) or i is None or i is Ellipsis for i in items)


def slice(x, idx):  # noqa: A001  (mirrors the op name)
    basic = _is_basic_index(idx)

    def backward(g):
        full = np.zeros_like(x.data)
        if basic:
            full[idx] = g
        else:
            np.add.at(full, idx, g)
        return (full,)

    return Tensor._from_op(x.data[idx], (x,), backward, "slice")


def reshape(x, shape):
    def backward(g):
        return (g.reshape(x.shape),)

    return Tensor._from_op(x.data.reshape(shape), (x,), backward, "reshape")


def transpose(x, axes=None):
    if axes is None:
        axes = tuple(range(x.ndim))[::-1]
    inv = np.argsort(axes)

    def backward(g):
        return (np.transpose(g, inv),)

    return Tensor._from_op(np.transpose(x.data, axes), (x,), backward, "transpose")


def sum(x, axis=None, keepdims=False):  # noqa: A001
    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return Tensor._from_op(np.asarray(x.data.sum(axis=axis, keepdims=keepdims)), (x,), backward, "sum")


def mean(x, axis=None, keepdims=False):
    n = x.data.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return mul(sum(x, axis, keepdims), 1.0 / n)


def gather(table, idx):
    """Row lookup ``table[idx]``; gradients scatter-add back into the table."""
    idx = np.asarray(idx)

    def backward(g):
        full = np.zeros_like(table.data)
        np.add.at(full, idx, g)
        return (full,)

    return Tensor._from_op(table.data[idx], (table,), backward, "gather")


def einsum(subscripts, a, b):
    """Two-operand einsum; every index of an operand must also appear elsewhere."""
    a, b = _pair(a, b)
    ins, out_sub = subscripts.replace(" ", "").split("->")
    sa, sb = ins.split(",")
    for own, other in ((sa, sb), (sb, sa)):
        if any(c not in out_sub and c not in other for c in own):
            raise InvalidInput(f"einsum {subscripts!r}: index summed within one operand")
    try:
        data = np.einsum(subscripts, a.data, b.data, optimize=True)
    except ValueError as e:
        raise ShapeError(f"einsum {subscripts!r}: {e}") from None

    def backward(g):
        ga = np.einsum(f"{out_sub},{sb}->{sa}", g, b.data, optimize=True)
        gb = np.einsum(f"{out_sub},{sa}->{sb}", g, a.data, optimize=True)
        return ga, gb

    return Tensor._from_op(data, (a, b), backward, "einsum")


# ------------------------------------------------------------ neural network

def softmax(x, axis=-1):
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return Tensor._from_op(y, (x,), backward, "softmax")


def dropout(x, p, train_mode=True, seed=None, rng=None):
    """Inverted dropout: kept units scale by ``1/(1-p)``; identity in eval mode."""
    if not 0.0 <= p < 1.0:
        raise InvalidInput(f"dropout probability must be in [0, 1), got {p}")
    if not train_mode or p == 0.0:
        return x
    if rng is None:
        rng = np.random.default_rng(seed)
    scale = (rng.random(x.shape) >= p).astype(x.data.dtype) / (1.0 - p)

    def backward(g):
        return (g * scale,)

    return Tensor._from_op(x.data * scale, (x,), backward, "dropout")


def l1_loss(pred, target):
    """Mean absolute error over all elements; the subgradient at 0 is 0."""
    pred, target = _pair(pred, target)
    if pred.shape != target.shape:
        raise ShapeError(f"l1_loss: pred {pred.shape} vs target {target.shape}")
    diff = pred.data - target.data
    n = diff.size

    def backward(g):
        s = np.sign(diff) * (g / n)
        return s, -s

    return Tensor._from_op(np.asarray(np.abs(diff).mean()), (pred, target), backward, "l1_loss")


def _as_batched(x):
    if x.ndim == 2:
        return reshape(x, (1,) + x.shape), True
    if x.ndim != 3:
        raise ShapeError(f"expected (L, C) or (B, L, C), got {x.shape}")
    return x, False


def _unbatch(out, squeeze):
    return reshape(out, out.shape[1:]) if squeeze else out


def conv1d(x, weight, bias=None):
    """Stride-1 'same' cross-correlation along time.

    ``x`` is (B, L, C_in) or (L, C_in); ``weight`` is (C_out, C_in, k) with k
    odd; zero padding of (k-1)/2 on each side keeps length L.
    """
    x = as_tensor(x)
    xb, squeeze = _as_batched(x)
    c_out, c_in, k = weight.shape
    if k % 2 == 0:
        raise ShapeError(f"conv1d: kernel size must be odd for same padding, got {k}")
    if xb.shape[2] != c_in:
        raise ShapeError(f"conv1d: input has {xb.shape[2]} channels, kernel expects {c_in}")
    B, L, _ = xb.shape
    pad = (k - 1) // 2
    xpad = np.pad(xb.data, ((0, 0), (pad, pad), (0, 0)))
    win = np.lib.stride_tricks.sliding_window_view(xpad, k, axis=1)  # (B, L, C_in, k)
    cols = win.reshape(B * L, c_in * k)
    wmat = weight.data.reshape(c_out, c_in * k)
    out = (cols @ wmat.T).reshape(B, L, c_out)

    def backward(g):
        g2 = g.reshape(B * L, c_out)
        gw = (g2.T @ cols).reshape(weight.shape)
        gcols = (g2 @ wmat).reshape(B, L, c_in, k)
        gpad = np.zeros_like(xpad)
        for s in range(k):
            gpad[:, s:s + L, :] += gcols[..., s]
        return gpad[:, pad:pad + L, :], gw

    y = Tensor._from_op(out, (xb, weight), backward, "conv1d")
    if bias is not None:
        y = add(y, bias)
    return _unbatch(y, squeeze)


def time_map(x, matrix, op="time_map"):
    """Apply a constant (L_out, L_in) matrix along the time axis."""
    m = np.asarray(matrix, dtype=x.data.dtype)
    if x.shape[-2] != m.shape[1]:
        raise ShapeError(f"{op}: time length {x.shape[-2]} != {m.shape[1]}")

    def backward(g):
        return (_unbroadcast(m.T @ g, x.shape),)

    return Tensor._from_op(m @ x.data, (x,), backward, op)


@functools.lru_cache(maxsize=256)
def pool_matrix(length, size=2):
    n_out = -(-length // size)
    m = np.zeros((n_out, length))
    for o in range(n_out):
        lo, hi = o * size, min(length, (o + 1) * size)
        m[o, lo:hi] = 1.0 / (hi - lo)
    m.setflags(write=False)
    return m


@functools.lru_cache(maxsize=256)
def upsample_matrix(length, target_len):
    """Endpoint-preserving linear interpolation from ``length`` to ``target_len`` samples."""
    m = np.zeros((target_len, length))
    if length == 1 or target_len == 1:
        m[:, 0] = 1.0
    else:
        pos = np.arange(target_len) * (length - 1) / (target_len - 1)
        lo = np.minimum(np.floor(pos).astype(int), length - 2)
        frac = pos - lo
        m[np.arange(target_len), lo] = 1.0 - frac
        m[np.arange(target_len), lo + 1] += frac
    m.setflags(write=False)
    return m


def avg_pool1d(x, size=2):
    """Average disjoint windows along time; the last window may be shorter."""
    if x.shape[-2] < 1:
        raise InvalidInput("avg_pool1d needs at least one frame")
    return time_map(x, pool_matrix(x.shape[-2], size), "avg_pool1d")


def linear_upsample(x, target_len):
    if target_len < 1:
        raise InvalidInput("target_len must be >= 1")
    if target_len == x.shape[-2]:
        return x
    return time_map(x, upsample_matrix(x.shape[-2], target_len), "linear_upsample")


class RunningStats:
    """Batch-norm running mean/variance buffers (not learnable)."""

    def __init__(self, n, dtype=np.float64):
        self.mean = np.zeros(n, dtype=dtype)
        self.var = np.ones(n, dtype=dtype)


def batch_norm1d(x, gamma, beta, running, train_mode=True, momentum=0.1, eps=1e-5):
    """Normalise each channel over (batch, time).

    In training mode batch statistics are used and ``running`` is updated
    with ``momentum`` (unbiased variance); in eval mode the running
    statistics are used.
    """
    x = as_tensor(x)
    c = x.shape[-1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError(f"batch_norm1d: {c} channels but gamma {gamma.shape}, beta {beta.shape}")
    axes = tuple(range(x.ndim - 1))
    n = int(np.prod([x.shape[a] for a in axes]))
    if train_mode:
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        if running is not None:
            unbiased = var * n / max(n - 1, 1)
            running.mean[...] = (1 - momentum) * running.mean + momentum * mu
            running.var[...] = (1 - momentum) * running.var + momentum * unbiased
    else:
        mu = running.mean.astype(x.data.dtype)
        var = running.var.astype(x.data.dtype)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out = xhat * gamma.data + beta.data

    def backward(g):
        gg = (g * xhat).sum(axis=axes)
        gb = g.sum(axis=axes)
        dxhat = g * gamma.data
        if train_mode:
            gx = inv / n * (n * dxhat - dxhat.sum(axis=axes) - xhat * (dxhat * xhat).sum(axis=axes))
        else:
            gx = dxhat * inv
        return gx, gg, gb

    return Tensor._from_op(out.astype(x.data.dtype, copy=False), (x, gamma, beta), backward, "batch_norm1d")


def lstm(x, w_ih, w_hh, bias, h0=None, c0=None):
    """Single-layer unidirectional LSTM over (B, L, D_in) or (L, D_in).

    Gate order in the 4H rows of the weights is input, forget, cell, output.
    Returns the hidden states for every step, (B, L, H).
    """
    x = as_tensor(x)
    xb, squeeze = _as_batched(x)
    B, L, d_in = xb.shape
    four_h, h_dim = w_hh.shape
    if four_h != 4 * h_dim or w_ih.shape != (four_h, d_in) or bias.shape != (four_h,):
        raise ShapeError(
            f"lstm: w_ih {w_ih.shape}, w_hh {w_hh.shape}, bias {bias.shape} "
            f"inconsistent with input dim {d_in}"
        )
    dtype = xb.data.dtype
    h0 = as_tensor(np.zeros((B, h_dim), dtype)) if h0 is None else as_tensor(h0)
    c0 = as_tensor(np.zeros((B, h_dim), dtype)) if c0 is None else as_tensor(c0)
    if h0.shape != (B, h_dim) or c0.shape != (B, h_dim):
        raise ShapeError(f"lstm: initial state must be {(B, h_dim)}")

    xw = xb.data @ w_ih.data.T + bias.data  # (B, L, 4H)
    wt = w_hh.data.T
    H = h_dim
    hs = np.empty((B, L, H), dtype)
    gates = np.empty((B, L, 4 * H), dtype)
    cs = np.empty((B, L, H), dtype)
    h, c = h0.data, c0.data
    for t in range(L):
        z = xw[:, t] + h @ wt
        i = _sigmoid(z[:, :H])
        f = _sigmoid(z[:, H:2 * H])
        gc = np.tanh(z[:, 2 * H:3 * H])
        o = _sigmoid(z[:, 3 * H:])
        c = f * c + i * gc
        h = o * np.tanh(c)
        gates[:, t, :H], gates[:, t, H:2 * H] = i, f
        gates[:, t, 2 * H:3 * H], gates[:, t, 3 * H:] = gc, o
        cs[:, t], hs[:, t] = c, h

    def backward(gh):
        dz_all = np.empty_like(gates)
        dh_next = np.zeros((B, H), dtype)
        dc_next = np.zeros((B, H), dtype)
        gw_hh = np.zeros_like(w_hh.data)
        for t in range(L - 1, -1, -1):
            i, f = gates[:, t, :H], gates[:, t, H:2 * H]
            gc, o = gates[:, t, 2 * H:3 * H], gates[:, t, 3 * H:]
            c_prev = cs[:, t - 1] if t > 0 else c0.data
            h_prev = hs[:, t - 1] if t > 0 else h0.data
            tc = np.tanh(cs[:, t])
            dh = gh[:, t] + dh_next
            dc = dh * o * (1 - tc * tc) + dc_next
            dz = dz_all[:, t]
            dz[:, :H] = dc * gc * i * (1 - i)
            dz[:, H:2 * H] = dc * c_prev * f * (1 - f)
            dz[:, 2 * H:3 * H] = dc * i * (1 - gc * gc)
            dz[:, 3 * H:] = dh * tc * o * (1 - o)
            gw_hh += dz.T @ h_prev
            dh_next = dz @ w_hh.data
            dc_next = dc * f
        flat = dz_all.reshape(B * L, 4 * H)
        gx = dz_all @ w_ih.data
        gw_ih = flat.T @ xb.data.reshape(B * L, d_in)
        return gx, gw_ih, gw_hh, flat.sum(axis=0), dh_next, dc_next

    y = Tensor._from_op(hs, (xb, w_ih, w_hh, bias, h0, c0), backward, "lstm")
    return _unbatch(y, squeeze)
