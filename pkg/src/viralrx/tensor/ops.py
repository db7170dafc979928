"""Differentiable primitives.

Shapes follow a batch-first convention: sequences are ``(B, L, C)``, images
``(B, H, W)``.  Every primitive computes its forward value with numpy and,
when recording, registers an exact vector-Jacobian product.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeError
from .core import Tensor, as_tensor, record


def _shape_error(op, a, b, why=""):
    msg = f"{op}: incompatible shapes {tuple(a)} and {tuple(b)}"
    return ShapeError(f"{msg} ({why})" if why else msg)


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


# ---------------------------------------------------------------------------
# elementwise and reductions


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    try:
        out = Tensor(a.data + b.data)
    except ValueError:
        raise _shape_error("add", a.shape, b.shape) from None
    record("add", (a, b), (out,), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))
    return out


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    try:
        out = Tensor(a.data * b.data)
    except ValueError:
        raise _shape_error("mul", a.shape, b.shape) from None

    def vjp(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    record("mul", (a, b), (out,), vjp)
    return out


def sum(x):
    out = Tensor(x.data.sum())
    record("sum", (x,), (out,), lambda g: (np.broadcast_to(g, x.shape).copy(),))
    return out


def mean(x):
    n = x.size
    out = Tensor(x.data.mean())
    record("mean", (x,), (out,), lambda g: (np.full(x.shape, g / n),))
    return out


def reshape(x, shape):
    try:
        out = Tensor(x.data.reshape(shape))
    except ValueError:
        raise _shape_error("reshape", x.shape, shape) from None
    record("reshape", (x,), (out,), lambda g: (g.reshape(x.shape),))
    return out


def reverse(x, axis):
    out = Tensor(np.flip(x.data, axis=axis).copy())
    record("reverse", (x,), (out,), lambda g: (np.flip(g, axis=axis).copy(),))
    return out


def relu(x):
    pos = x.data > 0
    out = Tensor(np.where(pos, x.data, 0.0))
    record("relu", (x,), (out,), lambda g: (g * pos,))
    return out


def elu(x, alpha=1.0):
    out = np.minimum(x.data, 0.0)
    np.expm1(out, out=out)
    if alpha == 1.0:
        # expm1(x) >= x for x <= 0, so the max picks the right branch
        np.maximum(out, x.data, out=out)
    else:
        out *= alpha
        out = np.where(x.data > 0, x.data, out)
    res = Tensor(out)

    def vjp(g):
        d = out + alpha
        if alpha == 1.0:
            np.minimum(d, 1.0, out=d)
        else:
            d[out > 0] = 1.0
        np.multiply(d, g, out=d)
        return (d,)

    record("elu", (x,), (res,), vjp)
    return res


def sigmoid(x):
    s = _sigmoid(x.data)
    out = Tensor(s)
    record("sigmoid", (x,), (out,), lambda g: (g * s * (1.0 - s),))
    return out


def tanh(x):
    t = np.tanh(x.data)
    out = Tensor(t)
    record("tanh", (x,), (out,), lambda g: (g * (1.0 - t * t),))
    return out


def dropout(x, rate, rng=None, training=False):
    """Inverted dropout; the identity unless ``training`` and ``rate > 0``."""
    if not training or rate == 0:
        return x
    if not 0 <= rate < 1:
        raise ValueError("dropout rate must lie in [0, 1)")
    rng = np.random.default_rng() if rng is None else rng
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    out = Tensor(x.data * keep)
    record("dropout", (x,), (out,), lambda g: (g * keep,))
    return out


# ---------------------------------------------------------------------------
# dense


def matmul(a, b):
    """``(..., k) @ (k, m) -> (..., m)``."""
    if b.ndim != 2 or a.ndim < 1 or a.shape[-1] != b.shape[0]:
        raise _shape_error("matmul", a.shape, b.shape)
    out = Tensor(a.data @ b.data)
    k, m = b.shape

    def vjp(g):
        ga = g @ b.data.T if a.requires_grad else None
        gb = a.data.reshape(-1, k).T @ g.reshape(-1, m) if b.requires_grad else None
        return ga, gb

    record("matmul", (a, b), (out,), vjp)
    return out


def bias_add(x, b):
    if b.ndim != 1 or x.shape[-1] != b.shape[0]:
        raise _shape_error("bias_add", x.shape, b.shape)
    out = Tensor(x.data + b.data)
    n = b.shape[0]
    record("bias_add", (x, b), (out,), lambda g: (g, g.reshape(-1, n).sum(axis=0)))
    return out


def embedding_lookup(table, ids):
    """Rows of ``table`` (V, E) gathered by integer ``ids`` of any shape."""
    ids = np.asarray(ids)
    if table.ndim != 2:
        raise _shape_error("embedding_lookup", table.shape, ids.shape, "table must be 2-D")
    if not np.issubdtype(ids.dtype, np.integer):
        raise ShapeError("embedding_lookup: ids must be integers")
    v, e = table.shape
    if ids.size and (ids.min() < 0 or ids.max() >= v):
        raise ShapeError(f"embedding_lookup: ids outside [0, {v})")
    out = Tensor(table.data[ids])

    def vjp(g):
        flat = ids.reshape(-1)
        g2 = g.reshape(-1, e)
        if v <= 4096:
            onehot = np.zeros((flat.size, v))
            onehot[np.arange(flat.size), flat] = 1.0
            return (onehot.T @ g2,)
        gt = np.zeros((v, e))
        np.add.at(gt, flat, g2)
        return (gt,)

    record("embedding_lookup", (table,), (out,), vjp)
    return out


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    except ValueError:
        raise _shape_error("concat", tensors[0].shape, tensors[-1].shape) from None
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def vjp(g):
        return tuple(np.split(g, bounds, axis=axis))

    record("concat", tuple(tensors), (out,), vjp)
    return out


# ---------------------------------------------------------------------------
# convolution and pooling


def conv1d_valid(x, w):
    """Valid 1-D convolution (cross-correlation).

    ``x``: ``(B, L, C_in)`` or ``(L, C_in)``; ``w``: ``(K, C_in, C_out)``.
    Returns ``(B, L - K + 1, C_out)`` (batch axis dropped for 2-D input).
    """
    if w.ndim != 3:
        raise _shape_error("conv1d_valid", x.shape, w.shape, "kernels must be K x C_in x C_out")
    squeeze = x.ndim == 2
    xd = x.data[None] if squeeze else x.data
    if xd.ndim != 3:
        raise _shape_error("conv1d_valid", x.shape, w.shape)
    bsz, length, cin = xd.shape
    k, wcin, cout = w.shape
    if wcin != cin:
        raise _shape_error("conv1d_valid", x.shape, w.shape, "channel mismatch")
    if length < k:
        raise _shape_error("conv1d_valid", x.shape, w.shape, "signal shorter than kernel")
    lo = length - k + 1
    # (B, Lo, C_in, K) -> (B, Lo, K, C_in)
    cols = sliding_window_view(xd, k, axis=1).transpose(0, 1, 3, 2).reshape(bsz * lo, k * cin)
    wmat = w.data.reshape(k * cin, cout)
    res = (cols @ wmat).reshape(bsz, lo, cout)
    out = Tensor(res[0] if squeeze else res)

    def vjp(g):
        g2 = g.reshape(bsz * lo, cout)
        gw = (cols.T @ g2).reshape(w.shape) if w.requires_grad else None
        gx = None
        if x.requires_grad:
            gcols = (g2 @ wmat.T).reshape(bsz, lo, k, cin)
            gx = np.zeros((bsz, length, cin))
            for i in range(k):
                gx[:, i : i + lo, :] += gcols[:, :, i, :]
            if squeeze:
                gx = gx[0]
        return gx, gw

    record("conv1d_valid", (x, w), (out,), vjp)
    return out


def conv2d_valid(image, kernels):
    """Valid single-channel 2-D convolution (cross-correlation).

    ``image``: ``(B, H, W)`` or ``(H, W)``; ``kernels``: ``(kh, kw, F)``.
    Returns ``(B, H - kh + 1, W - kw + 1, F)``.
    """
    if kernels.ndim != 3:
        raise _shape_error("conv2d_valid", image.shape, kernels.shape, "kernels must be kh x kw x F")
    squeeze = image.ndim == 2
    xd = image.data[None] if squeeze else image.data
    if xd.ndim != 3:
        raise _shape_error("conv2d_valid", image.shape, kernels.shape)
    bsz, h, wd = xd.shape
    kh, kw, f = kernels.shape
    if h < kh or wd < kw:
        raise _shape_error("conv2d_valid", image.shape, kernels.shape, "image smaller than kernel")
    ho, wo = h - kh + 1, wd - kw + 1
    cols = sliding_window_view(xd, (kh, kw), axis=(1, 2)).reshape(bsz * ho * wo, kh * kw)
    kmat = kernels.data.reshape(kh * kw, f)
    res = (cols @ kmat).reshape(bsz, ho, wo, f)
    out = Tensor(res[0] if squeeze else res)

    def vjp(g):
        g2 = g.reshape(bsz * ho * wo, f)
        gk = (cols.T @ g2).reshape(kernels.shape) if kernels.requires_grad else None
        gx = None
        if image.requires_grad:
            gcols = (g2 @ kmat.T).reshape(bsz, ho, wo, kh, kw)
            gx = np.zeros((bsz, h, wd))
            for i in range(kh):
                for j in range(kw):
                    gx[:, i : i + ho, j : j + wo] += gcols[..., i, j]
            if squeeze:
                gx = gx[0]
        return gx, gk

    record("conv2d_valid", (image, kernels), (out,), vjp)
    return out


def maxpool1d(x, window, stride=None):
    """Max over windows along axis 1 of ``(B, L, C)``; ties go to the first index."""
    stride = window if stride is None else stride
    if x.ndim != 3:
        raise ShapeError(f"maxpool1d: expected (B, L, C), got {x.shape}")
    bsz, length, c = x.shape
    if window < 1 or stride < 1 or length < window:
        raise ShapeError(f"maxpool1d: window {window} does not fit length {length}")
    # (B, Lo, C, window)
    win = sliding_window_view(x.data, window, axis=1)[:, ::stride]
    lo = win.shape[1]
    arg = win.argmax(axis=-1)
    out = Tensor(np.take_along_axis(win, arg[..., None], axis=-1)[..., 0])

    def vjp(g):
        gx = np.zeros(x.shape)
        starts = np.arange(lo) * stride
        for off in range(window):
            hit = arg == off
            if hit.any():
                # positions at one offset are distinct across windows
                gx[:, starts + off, :] += np.where(hit, g, 0.0)
        return (gx,)

    record("maxpool1d", (x,), (out,), vjp)
    return out


def global_maxpool(x, axis=1):
    """Max over ``axis`` (dropped); ties go to the first index."""
    arg = np.expand_dims(x.data.argmax(axis=axis), axis)
    out = Tensor(np.take_along_axis(x.data, arg, axis=axis).squeeze(axis))

    def vjp(g):
        gx = np.zeros(x.shape)
        np.put_along_axis(gx, arg, np.expand_dims(g, axis), axis=axis)
        return (gx,)

    record("global_maxpool", (x,), (out,), vjp)
    return out


# ---------------------------------------------------------------------------
# recurrent


def _check_lstm(op, d, wx, wh, b):
    if wx.ndim != 2 or wx.shape[1] % 4:
        raise _shape_error(op, (d,), wx.shape, "input weights must be D x 4H")
    hidden = wx.shape[1] // 4
    if wx.shape[0] != d:
        raise _shape_error(op, (d,), wx.shape, "input width mismatch")
    if wh.shape != (hidden, 4 * hidden):
        raise _shape_error(op, wx.shape, wh.shape, "recurrent weights must be H x 4H")
    if b.shape != (4 * hidden,):
        raise _shape_error(op, wx.shape, b.shape, "bias must have 4H entries")
    return hidden


def _gates(z, hidden):
    i = _sigmoid(z[:, :hidden])
    f = _sigmoid(z[:, hidden : 2 * hidden])
    g = np.tanh(z[:, 2 * hidden : 3 * hidden])
    o = _sigmoid(z[:, 3 * hidden :])
    return i, f, g, o


def _gate_grads(dc, dh_out, i, f, g, o, c_prev, tc):
    """Back-propagate through one cell; returns (dz, dc_prev)."""
    do = dh_out * tc
    dc = dc + dh_out * o * (1.0 - tc * tc)
    dz = np.concatenate(
        [dc * g * i * (1.0 - i), dc * c_prev * f * (1.0 - f), dc * i * (1.0 - g * g), do * o * (1.0 - o)],
        axis=1,
    )
    return dz, dc * f


def lstm_cell(x, h, c, wx, wh, b):
    """One LSTM step with gates ordered (input, forget, cell, output).

    ``x``: ``(B, D)``, ``h``/``c``: ``(B, H)``, ``wx``: ``(D, 4H)``,
    ``wh``: ``(H, 4H)``, ``b``: ``(4H,)``.  Returns ``(h_next, c_next)``.
    """
    hidden = _check_lstm("lstm_cell", x.shape[-1], wx, wh, b)
    if h.shape != (x.shape[0], hidden) or c.shape != h.shape:
        raise _shape_error("lstm_cell", h.shape, c.shape, "state must be B x H")
    z = x.data @ wx.data + h.data @ wh.data + b.data
    i, f, g, o = _gates(z, hidden)
    c_next = f * c.data + i * g
    tc = np.tanh(c_next)
    h_out = Tensor(o * tc)
    c_out = Tensor(c_next)

    def vjp(gh, gc):
        dz, dc_prev = _gate_grads(gc, gh, i, f, g, o, c.data, tc)
        return (
            dz @ wx.data.T,
            dz @ wh.data.T,
            dc_prev,
            x.data.T @ dz,
            h.data.T @ dz,
            dz.sum(axis=0),
        )

    record("lstm_cell", (x, h, c, wx, wh, b), (h_out, c_out), vjp)
    return h_out, c_out


def lstm_scan(x, wx, wh, b, reverse=False, mask=None):
    """Run an LSTM over ``x`` of shape ``(B, T, D)`` from zero state.

    With ``reverse=True`` time runs from ``T-1`` down to 0; outputs stay
    aligned with their input positions.  ``mask`` (``(B, T)`` of 0/1) freezes
    the state at masked steps, so a reversed scan starts at the last
    unmasked position.  Returns ``(B, T, H)``.
    """
    if x.ndim != 3:
        raise ShapeError(f"lstm_scan: expected (B, T, D), got {x.shape}")
    bsz, steps, d = x.shape
    hidden = _check_lstm("lstm_scan", d, wx, wh, b)
    m = None
    if mask is not None:
        m = np.asarray(mask, dtype=np.float64)
        if m.shape != (bsz, steps):
            raise _shape_error("lstm_scan", x.shape, m.shape, "mask must be B x T")
    order = range(steps - 1, -1, -1) if reverse else range(steps)

    zx = (x.data.reshape(-1, d) @ wx.data).reshape(bsz, steps, 4 * hidden) + b.data
    h = np.zeros((bsz, hidden))
    c = np.zeros((bsz, hidden))
    hs = np.empty((bsz, steps, hidden))
    cache = {}
    for t in order:
        z = zx[:, t] + h @ wh.data
        i, f, g, o = _gates(z, hidden)
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        h_new = o * tc
        cache[t] = (h, c, i, f, g, o, tc)
        if m is not None:
            mt = m[:, t : t + 1]
            h_new = mt * h_new + (1.0 - mt) * h
            c_new = mt * c_new + (1.0 - mt) * c
        h, c = h_new, c_new
        hs[:, t] = h
    out = Tensor(hs)

    def vjp(gout):
        dz_all = np.zeros((bsz, steps, 4 * hidden))
        dwh = np.zeros_like(wh.data)
        dh = np.zeros((bsz, hidden))
        dc = np.zeros((bsz, hidden))
        for t in reversed(order):
            h_prev, c_prev, i, f, g, o, tc = cache[t]
            dh_tot = gout[:, t] + dh
            if m is not None:
                mt = m[:, t : t + 1]
                dh_pass, dc_pass = (1.0 - mt) * dh_tot, (1.0 - mt) * dc
                dh_tot, dc = mt * dh_tot, mt * dc
            dz, dc = _gate_grads(dc, dh_tot, i, f, g, o, c_prev, tc)
            dz_all[:, t] = dz
            dwh += h_prev.T @ dz
            dh = dz @ wh.data.T
            if m is not None:
                dh = dh + dh_pass
                dc = dc + dc_pass
        dz2 = dz_all.reshape(-1, 4 * hidden)
        gx = (dz2 @ wx.data.T).reshape(x.shape) if x.requires_grad else None
        gwx = x.data.reshape(-1, d).T @ dz2
        return gx, gwx, dwh, dz2.sum(axis=0)

    record("lstm_scan", (x, wx, wh, b), (out,), vjp)
    return out


def bidirectional_scan(x, forward_params, backward_params, mask=None):
    """Forward and reversed LSTM scans concatenated on the feature axis.

    Each ``*_params`` is a ``(wx, wh, b)`` triple.  Returns ``(B, T, 2H)``.
    """
    fwd = lstm_scan(x, *forward_params, reverse=False, mask=mask)
    bwd = lstm_scan(x, *backward_params, reverse=True, mask=mask)
    return concat([fwd, bwd], axis=-1)
