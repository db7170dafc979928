"""The two sequence classifiers as explicit stage lists.

A network is an ordered list of named stages.  Each stage maps the dict of
activations computed so far to one new tensor, which makes activation dumps
and resuming a forward pass from a dumped activation straightforward.
"""

from dataclasses import asdict, dataclass

import numpy as np

from .. import alphabet
from ..errors import ConfigError, EncodingMismatchError
from ..rng import stream
from ..tensor import (
    Tensor,
    add,
    bias_add,
    bidirectional_scan,
    concat,
    conv1d_valid,
    conv2d_valid,
    elu,
    embedding_lookup,
    global_maxpool,
    matmul,
    maxpool1d,
    parameter,
    relu,
    reshape,
)
from .encoding import MAX_LEN, one_hot_ids

REFERENCE_CNN_PARAMS = 209_022
REFERENCE_LSTM_PARAMS = 1_740_266
CNN_BANKS = (1, 2, 3, 5)

# added to masked LSTM outputs before the global max
_MASK_PENALTY = -1e9


@dataclass(frozen=True)
class CnnConfig:
    max_len: int = MAX_LEN
    in_width: int = alphabet.N_SYMBOLS
    bank_heights: tuple = CNN_BANKS
    filters_per_bank: int = 256
    out_dim: int = 126
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "bank_heights", tuple(self.bank_heights))
        if self.bank_heights != CNN_BANKS:
            raise ConfigError(f"CNN banks must be {CNN_BANKS}, got {self.bank_heights}")
        if self.in_width != alphabet.N_SYMBOLS:
            raise ConfigError(f"CNN input width must be {alphabet.N_SYMBOLS}")
        if min(self.max_len, self.filters_per_bank, self.out_dim) <= 0:
            raise ConfigError("CNN dimensions must be positive")
        if self.max_len < max(self.bank_heights):
            raise ConfigError("max_len shorter than the tallest filter")


@dataclass(frozen=True)
class LstmConfig:
    max_len: int = MAX_LEN
    embed_dim: int = 128
    conv_filters: int = 128
    conv_kernel: int = 5
    pool_window: int = 4
    pool_stride: int = 4
    lstm_hidden: int = 256
    fc1_dim: int = 512
    out_dim: int = 126
    mask_padding: bool = False
    seed: int = 0

    def __post_init__(self):
        dims = (self.max_len, self.embed_dim, self.conv_filters, self.conv_kernel, self.pool_window,
                self.pool_stride, self.lstm_hidden, self.fc1_dim, self.out_dim)
        if min(dims) <= 0:
            raise ConfigError("LSTM dimensions must be positive")
        if self.max_len < self.conv_kernel + self.pool_window - 1:
            raise ConfigError("max_len too short for the conv kernel and pool window")


def _uniform(rng, shape, fan_in):
    limit = np.sqrt(3.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


class Network:
    kind = "base"

    def __init__(self, config):
        self.config = config
        self.params = {}

    def parameters(self):
        return list(self.params.values())

    def n_parameters(self):
        return int(sum(p.size for p in self.params.values()))

    def state_dict(self):
        return {k: p.data.copy() for k, p in self.params.items()}

    def load_state_dict(self, arrays):
        missing = set(self.params) - set(arrays)
        if missing:
            raise KeyError(f"missing parameters: {sorted(missing)}")
        for k, p in self.params.items():
            arr = np.asarray(arrays[k], dtype=np.float64)
            if arr.shape != p.shape:
                raise EncodingMismatchError(f"{k}: checkpoint shape {arr.shape} != {p.shape}")
            p.data = arr.copy()

    def config_dict(self):
        return asdict(self.config)

    # subclasses provide encode(), _check_batch() and stages()

    def run(self, batch, lengths=None, start=None, acts=None):
        """Run stages and return every activation by name.

        With ``start`` set, stages before it are skipped and their outputs
        are taken from ``acts`` (e.g. a previous dump).
        """
        batch = self._check_batch(batch)
        state = {"input": Tensor(batch), "_lengths": lengths}
        names = [n for n, _ in self.stages()]
        begin = 0
        if start is not None:
            if start not in names:
                raise KeyError(f"unknown stage {start!r}")
            begin = names.index(start)
            for name in names[:begin]:
                state[name] = acts[name] if isinstance(acts[name], Tensor) else Tensor(acts[name])
        for name, fn in self.stages()[begin:]:
            state[name] = fn(state)
        return {k: v for k, v in state.items() if not k.startswith("_")}

    def forward(self, batch, lengths=None):
        """Logits ``(B, out_dim)`` for an encoded batch."""
        last = self.stages()[-1][0]
        return self.run(batch, lengths)[last]

    def layer_table(self):
        """Rows of (layer, output shape with batch as '?', trainable parameters)."""
        probe = self.encode(np.zeros((1, self.config.max_len), dtype=np.uint8))
        acts = self.run(probe)
        rows = [("input", ("?",) + acts["input"].shape[1:], 0)]
        for name, _ in self.stages():
            n = sum(p.size for k, p in self.params.items() if k.rsplit("/", 1)[0] == name)
            rows.append((name, ("?",) + acts[name].shape[1:], int(n)))
        return rows


class CNN(Network):
    """Four parallel conv banks over the one-hot image, ELU, global max, dense."""

    kind = "cnn"

    def __init__(self, config=None):
        super().__init__(config or CnnConfig())
        cfg = self.config
        rng = stream(cfg.seed, "init/cnn")
        w = cfg.in_width
        for h in cfg.bank_heights:
            self.params[f"bank{h}/conv2d/kernels"] = parameter(
                _uniform(rng, (h, w, cfg.filters_per_bank), h * w), f"bank{h}/conv2d/kernels"
            )
            self.params[f"bank{h}/conv2d/bias"] = parameter(np.zeros(cfg.filters_per_bank), f"bank{h}/conv2d/bias")
        feat = cfg.filters_per_bank * len(cfg.bank_heights)
        self.params["logits/weight"] = parameter(_uniform(rng, (feat, cfg.out_dim), feat), "logits/weight")
        self.params["logits/bias"] = parameter(np.zeros(cfg.out_dim), "logits/bias")

    def encode(self, ids):
        return one_hot_ids(ids)

    def _check_batch(self, batch):
        batch = np.asarray(batch)
        if batch.ndim != 3 or batch.shape[-1] != self.config.in_width or not np.issubdtype(batch.dtype, np.floating):
            raise EncodingMismatchError(
                f"CNN expects one-hot float batches (B, L, {self.config.in_width}), got {batch.dtype} {batch.shape}"
            )
        return batch

    def stages(self):
        p = self.params
        out = []
        for h in self.config.bank_heights:
            b = f"bank{h}"
            out += [
                (f"{b}/conv2d", lambda a, b=b: bias_add(conv2d_valid(a["input"], p[f"{b}/conv2d/kernels"]), p[f"{b}/conv2d/bias"])),
                (f"{b}/elu", lambda a, b=b: elu(a[f"{b}/conv2d"])),
                (f"{b}/maxpool", lambda a, b=b: global_maxpool(_squeeze_width(a[f"{b}/elu"]), axis=1)),
            ]
        banks = [f"bank{h}/maxpool" for h in self.config.bank_heights]
        out.append(("concat", lambda a: concat([a[n] for n in banks], axis=-1)))
        out.append(("logits", lambda a: bias_add(matmul(a["concat"], p["logits/weight"]), p["logits/bias"])))
        return out


def _squeeze_width(x):
    bsz, ho, wo, f = x.shape
    return reshape(x, (bsz, ho * wo, f))


class LSTM(Network):
    """Embedding, conv1d + ReLU, max-pool, bidirectional LSTM, global max, two dense layers."""

    kind = "lstm"

    def __init__(self, config=None):
        super().__init__(config or LstmConfig())
        cfg = self.config
        rng = stream(cfg.seed, "init/lstm")
        vocab = alphabet.N_SYMBOLS + 1
        table = rng.uniform(-0.05, 0.05, size=(vocab, cfg.embed_dim))
        table[alphabet.PAD_ID] = 0.0
        p = self.params
        p["embedding/table"] = parameter(table, "embedding/table")
        fan = cfg.conv_kernel * cfg.embed_dim
        p["conv1d/kernels"] = parameter(_uniform(rng, (cfg.conv_kernel, cfg.embed_dim, cfg.conv_filters), fan), "conv1d/kernels")
        p["conv1d/bias"] = parameter(np.zeros(cfg.conv_filters), "conv1d/bias")
        hdim = cfg.lstm_hidden
        for side in ("fwd", "bwd"):
            bias = np.zeros(4 * hdim)
            bias[hdim : 2 * hdim] = 1.0  # forget gate
            p[f"bilstm/{side}_wx"] = parameter(_uniform(rng, (cfg.conv_filters, 4 * hdim), cfg.conv_filters), f"bilstm/{side}_wx")
            p[f"bilstm/{side}_wh"] = parameter(_uniform(rng, (hdim, 4 * hdim), hdim), f"bilstm/{side}_wh")
            p[f"bilstm/{side}_b"] = parameter(bias, f"bilstm/{side}_b")
        p["dense1/weight"] = parameter(_uniform(rng, (2 * hdim, cfg.fc1_dim), 2 * hdim), "dense1/weight")
        p["dense1/bias"] = parameter(np.zeros(cfg.fc1_dim), "dense1/bias")
        p["logits/weight"] = parameter(_uniform(rng, (cfg.fc1_dim, cfg.out_dim), cfg.fc1_dim), "logits/weight")
        p["logits/bias"] = parameter(np.zeros(cfg.out_dim), "logits/bias")

    def encode(self, ids):
        return np.asarray(ids)

    def _check_batch(self, batch):
        batch = np.asarray(batch)
        if batch.ndim != 2 or not np.issubdtype(batch.dtype, np.integer):
            raise EncodingMismatchError(f"LSTM expects integer id batches (B, L), got {batch.dtype} {batch.shape}")
        return batch

    def _pooled_mask(self, a):
        """(B, T_pooled) validity mask, or None when masking is off."""
        if not self.config.mask_padding:
            return None
        cfg = self.config
        ids = a["input"].data
        lengths = a["_lengths"]
        if lengths is None:
            lengths = (ids != alphabet.PAD_ID).sum(axis=1)
        conv_len = np.asarray(lengths) - cfg.conv_kernel + 1
        n_pooled = a["maxpool1d"].shape[1]
        starts = np.arange(n_pooled) * cfg.pool_stride
        valid = starts[None, :] + cfg.pool_window <= conv_len[:, None]
        valid[:, 0] = True
        return valid.astype(np.float64)

    def stages(self):
        p = self.params
        cfg = self.config

        def ids(a):
            return a["input"].data.astype(np.int64)

        def bilstm(a):
            mask = self._pooled_mask(a)
            return bidirectional_scan(
                a["maxpool1d"],
                (p["bilstm/fwd_wx"], p["bilstm/fwd_wh"], p["bilstm/fwd_b"]),
                (p["bilstm/bwd_wx"], p["bilstm/bwd_wh"], p["bilstm/bwd_b"]),
                mask=mask,
            )

        def seq_max(a):
            x = a["bilstm"]
            mask = self._pooled_mask(a)
            if mask is not None:
                x = add(x, (1.0 - mask)[:, :, None] * _MASK_PENALTY)
            return global_maxpool(x, axis=1)

        return [
            ("embedding", lambda a: embedding_lookup(p["embedding/table"], ids(a))),
            ("conv1d", lambda a: bias_add(conv1d_valid(a["embedding"], p["conv1d/kernels"]), p["conv1d/bias"])),
            ("relu", lambda a: relu(a["conv1d"])),
            ("maxpool1d", lambda a: maxpool1d(a["relu"], cfg.pool_window, cfg.pool_stride)),
            ("bilstm", bilstm),
            ("global_maxpool", seq_max),
            ("dense1", lambda a: relu(bias_add(matmul(a["global_maxpool"], p["dense1/weight"]), p["dense1/bias"]))),
            ("logits", lambda a: bias_add(matmul(a["dense1"], p["logits/weight"]), p["logits/bias"])),
        ]


def build_cnn(config=None, exact=False):
    """Build the CNN; with ``exact`` the parameter count must be 209,022."""
    net = CNN(config or CnnConfig())
    if exact and net.n_parameters() != REFERENCE_CNN_PARAMS:
        raise ConfigError(f"CNN has {net.n_parameters():,} parameters, expected {REFERENCE_CNN_PARAMS:,}")
    return net


def build_lstm(config=None):
    return LSTM(config or LstmConfig())


def build(kind, **config):
    if kind == "cnn":
        return build_cnn(CnnConfig(**config))
    if kind == "lstm":
        return build_lstm(LstmConfig(**config))
    raise ConfigError(f"unknown model kind {kind!r}")


def format_layer_table(network):
    rows = network.layer_table()
    width = max(len(r[0]) for r in rows)
    lines = [f"{'layer':<{width}}  {'output shape':<22} {'params':>10}"]
    for name, shape, n in rows:
        shp = "(" + ", ".join(str(s) for s in shape) + ")"
        lines.append(f"{name:<{width}}  {shp:<22} {n:>10,}")
    lines.append(f"total trainable parameters: {network.n_parameters():,}")
    return "\n".join(lines)
