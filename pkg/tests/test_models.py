import numpy as np
import pytest
from sklearn.base import clone

from viralrx.errors import CheckpointError, ConfigError, EncodingMismatchError
from viralrx.models import (
    CNN,
    LSTM,
    REFERENCE_CNN_PARAMS,
    CNNClassifier,
    CnnConfig,
    LSTMClassifier,
    LstmConfig,
    build,
    build_cnn,
    format_layer_table,
    load_model,
    make_classifier,
)
from viralrx.models.encoding import one_hot, tokenize_pad
from viralrx.report import dump_activations
from viralrx.tensor import container

SEQ = "MKVLAAGIVGLLLAQPSWAHEDRTYCNFG" * 3


def test_cnn_parameter_count_matches_reference():
    net = build_cnn(exact=True)
    assert net.n_parameters() == REFERENCE_CNN_PARAMS == 209_022
    # four banks of 28*h*256 + 256, then 1024 x 126 + 126
    assert sum(28 * h * 256 + 256 for h in (1, 2, 3, 5)) + 1024 * 126 + 126 == 209_022
    with pytest.raises(ConfigError):
        build_cnn(CnnConfig(filters_per_bank=10), exact=True)


def test_cnn_rejects_other_bank_shapes():
    with pytest.raises(ConfigError):
        CnnConfig(bank_heights=(1, 2, 3))


def test_lstm_parameter_count_is_analytic():
    cfg = LstmConfig()
    e, f, k, h, d1, o = cfg.embed_dim, cfg.conv_filters, cfg.conv_kernel, cfg.lstm_hidden, cfg.fc1_dim, cfg.out_dim
    expect = 29 * e + (k * e * f + f) + 2 * (f * 4 * h + h * 4 * h + 4 * h) + (2 * h * d1 + d1) + (d1 * o + o)
    assert LSTM(cfg).n_parameters() == expect


def test_layer_tables():
    cnn = CNN()
    table = format_layer_table(cnn)
    assert "total trainable parameters: 209,022" in table
    rows = {name: shape for name, shape, _ in cnn.layer_table()}
    assert rows["bank5/conv2d"] == ("?", 496, 1, 256)
    assert rows["concat"] == ("?", 1024)
    assert rows["logits"] == ("?", 126)
    lrows = {name: shape for name, shape, _ in LSTM(LstmConfig(max_len=100, out_dim=7)).layer_table()}
    assert lrows["maxpool1d"] == ("?", 24, 128)
    assert lrows["bilstm"] == ("?", 24, 512)
    assert lrows["logits"] == ("?", 7)


def test_encoding_mismatch_is_rejected():
    cnn = CNN(CnnConfig(max_len=20, filters_per_bank=2, out_dim=3))
    lstm = LSTM(LstmConfig(max_len=20, embed_dim=2, conv_filters=2, lstm_hidden=2, fc1_dim=2, out_dim=3))
    ids = tokenize_pad("MKV", 20)[None]
    with pytest.raises(EncodingMismatchError):
        cnn.forward(ids)
    with pytest.raises(EncodingMismatchError):
        lstm.forward(one_hot("MKV", 20)[None])


def test_initialisation_is_seeded():
    a, b = CNN(CnnConfig(seed=4)), CNN(CnnConfig(seed=4))
    assert all(np.array_equal(a.params[k].data, b.params[k].data) for k in a.params)
    c = CNN(CnnConfig(seed=5))
    assert not np.array_equal(a.params["logits/weight"].data, c.params["logits/weight"].data)


def test_build_dispatch():
    assert build("cnn", max_len=10, filters_per_bank=2, out_dim=2).kind == "cnn"
    with pytest.raises(ConfigError):
        build("gru")


# estimator API


def test_estimator_params_and_clone():
    est = LSTMClassifier(max_len=40, embed_dim=8, epochs=2)
    params = est.get_params()
    assert params["embed_dim"] == 8 and params["epochs"] == 2 and params["mask_padding"] is False
    twin = clone(est)
    assert twin.get_params() == params and twin is not est
    est.set_params(lr=0.5)
    assert est.lr == 0.5
    assert CNNClassifier().get_params()["lr"] == 1e-2
    assert isinstance(make_classifier("cnn", epochs=1), CNNClassifier)
    with pytest.raises(ValueError):
        make_classifier("transformer")


def tiny_task(n=24, seed=0):
    rng = np.random.default_rng(seed)
    X, Y = [], []
    for i in range(n):
        body = "".join(rng.choice(list("ADEGKLNPSTV"), size=30))
        if i % 2:
            body = body[:10] + "WWCH" + body[14:]
        X.append(body)
        Y.append([i % 2, 1 - i % 2])
    return X, np.array(Y, dtype=np.uint8)


def test_unfitted_estimator_raises():
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        CNNClassifier().predict(["MK"])


@pytest.mark.parametrize("cls,kw", [
    (CNNClassifier, dict(max_len=32, filters_per_bank=4, epochs=2, batch_size=8)),
    (LSTMClassifier, dict(max_len=32, embed_dim=4, conv_filters=4, conv_kernel=3, pool_window=2, pool_stride=2,
                          lstm_hidden=4, fc1_dim=6, epochs=2, batch_size=8)),
])
def test_save_load_gives_identical_predictions(tmp_path, cls, kw):
    X, Y = tiny_task()
    est = cls(**kw).fit(X, Y)
    assert len(est.history_) == 2
    path = tmp_path / "m.vrx"
    est.save(path, meta={"drugs": ["a", "b"]})
    back, header = load_model(path)
    assert header["drugs"] == ["a", "b"]
    assert type(back) is cls and back.get_params() == est.get_params()
    assert np.array_equal(back.predict_proba(X), est.predict_proba(X))
    proba = est.predict_proba(X)
    assert proba.shape == (24, 2) and np.all((proba > 0) & (proba < 1))
    assert est.predict(X).dtype == np.uint8
    assert np.array_equal(est.predict(X, threshold=1e-9), np.ones((24, 2), dtype=np.uint8))
    assert 0.0 <= est.score(X, Y) <= 1.0


def test_load_model_rejects_other_containers(tmp_path):
    container.save(tmp_path / "x.vrx", {"a": np.ones(2)}, {"kind": "cnn"})
    with pytest.raises(CheckpointError):
        load_model(tmp_path / "x.vrx")


# activation dumps


@pytest.mark.parametrize("kind", ["cnn", "lstm"])
def test_dump_resumes_to_same_logits(tmp_path, kind):
    if kind == "cnn":
        net = CNN(CnnConfig(max_len=40, filters_per_bank=5, out_dim=3))
        enc = one_hot(SEQ, 40)
        resume_at = "concat"
    else:
        net = LSTM(LstmConfig(max_len=40, embed_dim=6, conv_filters=5, lstm_hidden=4, fc1_dim=7, out_dim=3))
        enc = tokenize_pad(SEQ, 40)
        resume_at = "bilstm"
    path = tmp_path / "acts.vrx"
    arrays = dump_activations(net, enc, path)
    meta, loaded = container.load(path)
    assert [layer["name"] for layer in meta["layers"]][0] == "input"
    assert meta["layers"][-1]["name"] == "logits"
    assert all(a.shape[0] == 1 for a in loaded.values())
    # oracle: feeding the stored upstream activations back reproduces the logits
    resumed = net.run(loaded["input"].astype(enc.dtype), start=resume_at, acts=loaded)
    assert np.array_equal(resumed["logits"].data, loaded["logits"])
    assert np.array_equal(loaded["logits"], net.forward(enc[None]).data)
    again = tmp_path / "again.vrx"
    dump_activations(net, enc, again)
    assert path.read_bytes() == again.read_bytes()
    assert set(arrays) == set(loaded)
