"""Gradient-check suite over every primitive and both networks at toy sizes."""

import numpy as np

from . import ops
from .core import Tensor, parameter
from .gradcheck import grad_check
from .loss import bce_with_logits_weighted

TOLERANCE = 1e-4


def _p(rng, *shape, scale=1.0):
    return parameter(rng.standard_normal(shape) * scale)


def primitive_cases(seed=0):
    """``(name, fn, tensors)`` triples, one per primitive (plus masked variants)."""
    rng = np.random.default_rng(seed)
    cases = []

    def case(name, fn, *tensors):
        cases.append((name, fn, tensors))

    a, b = _p(rng, 3, 4), _p(rng, 4)
    case("add", lambda: ops.add(a, b), a, b)
    c, d = _p(rng, 2, 3, 4), _p(rng, 3, 1)
    case("mul", lambda: ops.mul(c, d), c, d)
    e = _p(rng, 3, 5)
    case("sum", lambda: ops.sum(e), e)
    case("mean", lambda: ops.mean(e), e)
    case("reshape", lambda: ops.reshape(e, (5, 3)), e)
    case("reverse", lambda: ops.reverse(c, 1), c)
    # keep values away from the ReLU/ELU kink at 0
    k = parameter(np.sign(rng.standard_normal((4, 6))) * rng.uniform(0.1, 2.0, (4, 6)))
    case("relu", lambda: ops.relu(k), k)
    case("elu", lambda: ops.elu(k), k)
    case("sigmoid", lambda: ops.sigmoid(e), e)
    case("tanh", lambda: ops.tanh(e), e)
    m1, m2 = _p(rng, 2, 3, 4), _p(rng, 4, 5)
    case("matmul", lambda: ops.matmul(m1, m2), m1, m2)
    bb = _p(rng, 4)
    case("bias_add", lambda: ops.bias_add(m1, bb), m1, bb)
    table = _p(rng, 29, 5)
    ids = rng.integers(0, 29, size=(2, 7))
    case("embedding_lookup", lambda: ops.embedding_lookup(table, ids), table)
    x1, x2 = _p(rng, 2, 3), _p(rng, 2, 4)
    case("concat", lambda: ops.concat([x1, x2], axis=-1), x1, x2)
    cx, cw = _p(rng, 2, 12, 3), _p(rng, 4, 3, 5)
    case("conv1d_valid", lambda: ops.conv1d_valid(cx, cw), cx, cw)
    img, ker = _p(rng, 2, 10, 6), _p(rng, 3, 6, 4)
    case("conv2d_valid", lambda: ops.conv2d_valid(img, ker), img, ker)
    px = _p(rng, 2, 13, 3)
    case("maxpool1d", lambda: ops.maxpool1d(px, 4, 3), px)
    case("global_maxpool", lambda: ops.global_maxpool(px, axis=1), px)

    hidden, dim = 3, 4
    wx, wh, bl = _p(rng, dim, 4 * hidden, scale=0.5), _p(rng, hidden, 4 * hidden, scale=0.5), _p(rng, 4 * hidden, scale=0.5)
    xi, h0, c0 = _p(rng, 2, dim), _p(rng, 2, hidden), _p(rng, 2, hidden)
    case("lstm_cell", lambda: ops.concat(list(ops.lstm_cell(xi, h0, c0, wx, wh, bl)), axis=-1), xi, h0, c0, wx, wh, bl)
    seq = _p(rng, 2, 6, dim)
    case("lstm_scan", lambda: ops.lstm_scan(seq, wx, wh, bl), seq, wx, wh, bl)
    mask = np.array([[1, 1, 1, 1, 1, 1], [1, 1, 1, 0, 0, 0]], dtype=np.float64)
    case("lstm_scan/masked_reverse", lambda: ops.lstm_scan(seq, wx, wh, bl, reverse=True, mask=mask), seq, wx, wh, bl)
    wx2, wh2, bl2 = _p(rng, dim, 4 * hidden, scale=0.5), _p(rng, hidden, 4 * hidden, scale=0.5), _p(rng, 4 * hidden, scale=0.5)
    case(
        "bidirectional_scan",
        lambda: ops.bidirectional_scan(seq, (wx, wh, bl), (wx2, wh2, bl2), mask=mask),
        seq, wx, wh, bl, wx2, wh2, bl2,
    )
    z = _p(rng, 4, 5, scale=2.0)
    t = (rng.random((4, 5)) < 0.4).astype(np.float64)
    from ..dataset import compute_class_weights

    w = compute_class_weights(t.astype(np.uint8))
    case("bce_with_logits_weighted", lambda: bce_with_logits_weighted(z, t, w), z)
    return cases


def _model_case(network, seed):
    rng = np.random.default_rng(seed)
    cfg = network.config
    # zero-initialised biases and the zero pad row put padded positions
    # exactly on the ReLU kink; jitter every parameter off it
    for p in network.parameters():
        p.data = p.data + 0.1 * rng.standard_normal(p.shape)
    lengths = rng.integers(cfg.max_len // 2, cfg.max_len + 1, size=2)
    ids = np.zeros((2, cfg.max_len), dtype=np.int64)
    for i, n in enumerate(lengths):
        ids[i, :n] = rng.integers(1, 29, size=n)
    batch = network.encode(ids)
    targets = (rng.random((2, cfg.out_dim)) < 0.5).astype(np.float64)

    def fn():
        return bce_with_logits_weighted(network.forward(batch), targets)

    return fn, network.parameters()


def model_cases(kind="all", seed=0):
    from ..models.networks import CNN, LSTM, CnnConfig, LstmConfig

    nets = []
    if kind in ("cnn", "all"):
        nets.append(("model/cnn", CNN(CnnConfig(max_len=16, filters_per_bank=3, out_dim=4, seed=seed))))
    if kind in ("lstm", "all"):
        small = dict(max_len=24, embed_dim=4, conv_filters=3, conv_kernel=3, pool_window=2, pool_stride=2,
                     lstm_hidden=3, fc1_dim=5, out_dim=4, seed=seed)
        nets.append(("model/lstm", LSTM(LstmConfig(**small))))
        nets.append(("model/lstm_masked", LSTM(LstmConfig(mask_padding=True, **small))))
    out = []
    for name, net in nets:
        fn, params = _model_case(net, seed)
        out.append((name, fn, params))
    return out


def run_suite(which="all", seed=0, tol=TOLERANCE, n_coords=24):
    """Run the checks; ``which`` is ``primitives``, ``cnn``, ``lstm`` or ``all``."""
    cases = []
    if which in ("primitives", "all"):
        cases += primitive_cases(seed)
    if which in ("cnn", "lstm", "all"):
        cases += model_cases(which, seed)
    if not cases:
        raise ValueError(f"unknown grad-check selection {which!r}")
    return [grad_check(fn, ts, name=name, tol=tol, n_coords=n_coords, seed=seed) for name, fn, ts in cases]


__all__ = ["run_suite", "primitive_cases", "model_cases", "TOLERANCE", "Tensor"]
