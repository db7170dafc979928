"""Input validation helpers shared by the estimators."""

import numpy as np

from . import alphabet
from .errors import ShapeError


def check_sequences(X):
    """Return ``X`` as a list of upper-case residue strings, validating the alphabet."""
    if isinstance(X, str):
        raise TypeError("expected a sequence of residue strings, got a single string")
    out = []
    for i, s in enumerate(X):
        if not isinstance(s, str):
            raise TypeError(f"sample {i}: expected str, got {type(s).__name__}")
        s = s.upper()
        alphabet.validate(s, f"sample {i}")
        out.append(s)
    if not out:
        raise ValueError("empty input")
    return out


def check_label_matrix(Y, n_samples=None, n_outputs=None):
    Y = np.asarray(Y)
    if Y.ndim != 2:
        raise ShapeError(f"label matrix must be 2-D, got shape {Y.shape}")
    if n_samples is not None and Y.shape[0] != n_samples:
        raise ShapeError(f"{Y.shape[0]} label rows for {n_samples} samples")
    if n_outputs is not None and Y.shape[1] != n_outputs:
        raise ShapeError(f"{Y.shape[1]} label columns, model has {n_outputs} outputs")
    if not np.all((Y == 0) | (Y == 1)):
        raise ValueError("labels must be binary")
    return Y.astype(np.uint8)


def check_threshold(threshold):
    if not 0 < threshold < 1:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    return float(threshold)
