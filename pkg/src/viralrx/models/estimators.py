"""scikit-learn style estimators around the two networks.

Both take residue strings as ``X`` and an ``(n_samples, n_drugs)`` binary
matrix as ``Y``::

    clf = CNNClassifier(epochs=5).fit(train_seqs, train_labels)
    proba = clf.predict_proba(test_seqs)
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..errors import CheckpointError
from ..tensor import container
from ..train import TrainConfig, evaluate, predict_logits, train
from ..tensor.ops import _sigmoid
from ..validation import check_label_matrix, check_sequences, check_threshold
from .encoding import MAX_LEN, tokenize_batch
from .networks import CNN, LSTM, CnnConfig, LstmConfig

CHECKPOINT_FORMAT = "viralrx-model"


class _SequenceClassifier(BaseEstimator):
    _network_cls = None
    _config_cls = None
    _network_params = ()

    def _network_config(self, out_dim):
        kw = {k: getattr(self, k) for k in self._network_params}
        return self._config_cls(max_len=self.max_len, out_dim=out_dim, seed=self.seed, **kw)

    def _train_config(self):
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            lr=self.lr,
            seed=self.seed,
            threshold=self.threshold,
            class_weighting=self.class_weight == "balanced",
        )

    def _encode(self, X):
        return tokenize_batch(check_sequences(X), self.max_len)

    def fit(self, X, Y, eval_set=None, class_weights=None, log=None):
        """Train from scratch.

        Parameters
        ----------
        X : sequence of str
        Y : array-like of shape (n_samples, n_drugs)
        eval_set : tuple (X_eval, Y_eval), optional
            Scored after every epoch; the snapshots land in ``history_``.
        class_weights : ClassWeights, optional
            Overrides the weights derived from ``Y``.
        log : callable, optional
            Receives every :class:`~viralrx.train.MetricsSnapshot`.
        """
        if self.class_weight not in ("balanced", None):
            raise ValueError("class_weight must be 'balanced' or None")
        ids = self._encode(X)
        Y = check_label_matrix(Y, n_samples=len(ids))
        eval_data = None
        if eval_set is not None:
            ev_ids = self._encode(eval_set[0])
            eval_data = (ev_ids, check_label_matrix(eval_set[1], len(ev_ids), Y.shape[1]))
        self.network_ = self._network_cls(self._network_config(Y.shape[1]))
        self.n_outputs_ = Y.shape[1]
        self.history_ = train(self.network_, ids, Y, self._train_config(), eval_data,
                              class_weights=class_weights, log=log)
        return self

    def decision_function(self, X):
        check_is_fitted(self, "network_")
        return predict_logits(self.network_, self._encode(X))

    def predict_proba(self, X):
        return _sigmoid(self.decision_function(X))

    def predict(self, X, threshold=None):
        t = check_threshold(self.threshold if threshold is None else threshold)
        return (self.predict_proba(X) >= t).astype(np.uint8)

    def evaluate(self, X, Y, threshold=None):
        check_is_fitted(self, "network_")
        t = self.threshold if threshold is None else threshold
        ids = self._encode(X)
        return evaluate(self.network_, ids, check_label_matrix(Y, len(ids), self.n_outputs_), t)

    def score(self, X, Y):
        """Micro-averaged F1 at ``threshold``."""
        return self.evaluate(X, Y).f1

    # persistence

    def save(self, path, meta=None):
        check_is_fitted(self, "network_")
        header = {
            "format": CHECKPOINT_FORMAT,
            "kind": self.network_.kind,
            "estimator": self.get_params(),
            "network": self.network_.config_dict(),
            "n_outputs": self.n_outputs_,
        }
        header.update(meta or {})
        container.save(path, self.network_.state_dict(), header)


class CNNClassifier(_SequenceClassifier):
    """Parallel-bank CNN over one-hot ``max_len x 28`` images.

    Parameters
    ----------
    max_len : int, default=500
        Sequences are cut or zero-padded to this length.
    filters_per_bank : int, default=256
        Filters in each of the 1, 2, 3 and 5 row banks.  256 with 126 outputs
        gives 209,022 trainable parameters.
    lr, epochs, batch_size : training hyperparameters.
    threshold : float, default=0.5
        Decision threshold for ``predict`` and metrics.
    class_weight : {"balanced", None}
        Per-drug inverse-frequency weights in the loss.
    seed : int
        Seeds initialisation and per-epoch shuffling.
    """

    _network_cls = CNN
    _config_cls = CnnConfig
    _network_params = ("filters_per_bank",)

    def __init__(self, max_len=MAX_LEN, filters_per_bank=256, lr=1e-2, epochs=20, batch_size=128,
                 threshold=0.5, class_weight="balanced", seed=0):
        self.max_len = max_len
        self.filters_per_bank = filters_per_bank
        self.lr = lr
        self.epochs = epochs
        self.batch_size = batch_size
        self.threshold = threshold
        self.class_weight = class_weight
        self.seed = seed


class LSTMClassifier(_SequenceClassifier):
    """Embedding, conv1d, max-pool, bidirectional LSTM and two dense layers.

    ``mask_padding=True`` keeps padded positions out of the recurrent state
    and the sequence max, so logits depend only on the real residues.
    """

    _network_cls = LSTM
    _config_cls = LstmConfig
    _network_params = ("embed_dim", "conv_filters", "conv_kernel", "pool_window", "pool_stride",
                       "lstm_hidden", "fc1_dim", "mask_padding")

    def __init__(self, max_len=MAX_LEN, embed_dim=128, conv_filters=128, conv_kernel=5, pool_window=4,
                 pool_stride=4, lstm_hidden=256, fc1_dim=512, mask_padding=False, lr=1e-3, epochs=20,
                 batch_size=128, threshold=0.5, class_weight="balanced", seed=0):
        self.max_len = max_len
        self.embed_dim = embed_dim
        self.conv_filters = conv_filters
        self.conv_kernel = conv_kernel
        self.pool_window = pool_window
        self.pool_stride = pool_stride
        self.lstm_hidden = lstm_hidden
        self.fc1_dim = fc1_dim
        self.mask_padding = mask_padding
        self.lr = lr
        self.epochs = epochs
        self.batch_size = batch_size
        self.threshold = threshold
        self.class_weight = class_weight
        self.seed = seed


ESTIMATORS = {"cnn": CNNClassifier, "lstm": LSTMClassifier}


def make_classifier(kind, **params):
    try:
        return ESTIMATORS[kind](**params)
    except KeyError:
        raise ValueError(f"unknown model kind {kind!r}") from None


def load_model(path):
    """Rebuild a fitted estimator from a checkpoint; returns ``(estimator, header)``."""
    header, arrays = container.load(path)
    if header.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path} is not a model checkpoint")
    est = make_classifier(header["kind"], **header["estimator"])
    net = est._network_cls(est._config_cls(**header["network"]))
    net.load_state_dict(arrays)
    est.network_ = net
    est.n_outputs_ = header["n_outputs"]
    est.history_ = []
    return est, header
