"""Character tokenizer and one-hot encoder for residue strings."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .. import alphabet
from ..validation import check_sequences

MAX_LEN = 500


def tokenize_pad(residues, max_len=MAX_LEN):
    """Ids of the first ``max_len`` residues, right-padded with 0."""
    alphabet.validate(residues)
    out = np.zeros(max_len, dtype=np.uint8)
    ids = alphabet.to_ids(residues[:max_len])
    out[: ids.size] = ids
    return out


def tokenize_batch(sequences, max_len=MAX_LEN):
    out = np.zeros((len(sequences), max_len), dtype=np.uint8)
    for row, residues in enumerate(sequences):
        ids = alphabet.to_ids(residues[:max_len])
        out[row, : ids.size] = ids
    return out


def one_hot_ids(ids):
    """``(..., L)`` ids -> ``(..., L, 28)`` float64; padding rows are zero."""
    ids = np.asarray(ids)
    eye = np.eye(alphabet.N_SYMBOLS + 1)[:, 1:]
    return eye[ids]


def one_hot(residues, max_len=MAX_LEN):
    """``max_len x 28`` one-hot image of a residue string."""
    return one_hot_ids(tokenize_pad(residues, max_len))


def decode_ids(ids):
    return "".join(alphabet.ID_TO_CHAR[int(i)] for i in ids if i != alphabet.PAD_ID)


def decode_one_hot(image):
    rows = np.asarray(image)
    nonzero = rows.sum(axis=-1) > 0
    return "".join(alphabet.SYMBOLS[j] for j in rows[nonzero].argmax(axis=-1))


class ResidueTokenizer(TransformerMixin, BaseEstimator):
    """Residue strings -> ``(n, max_len)`` uint8 id matrix (0 = padding)."""

    def __init__(self, max_len=MAX_LEN):
        self.max_len = max_len

    def fit(self, X, y=None):
        check_sequences(X)
        return self

    def transform(self, X):
        return tokenize_batch(check_sequences(X), self.max_len)

    def inverse_transform(self, ids):
        return [decode_ids(row) for row in ids]


class ResidueOneHotEncoder(TransformerMixin, BaseEstimator):
    """Residue strings -> ``(n, max_len, 28)`` one-hot images."""

    def __init__(self, max_len=MAX_LEN):
        self.max_len = max_len

    def fit(self, X, y=None):
        check_sequences(X)
        return self

    def transform(self, X):
        return one_hot_ids(tokenize_batch(check_sequences(X), self.max_len))

    def inverse_transform(self, images):
        return [decode_one_hot(img) for img in images]
