"""Binary cross-entropy on logits."""

import numpy as np

from ..errors import ShapeError
from .core import Tensor, record
from .ops import _sigmoid


def _check_targets(logits, targets):
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape != logits.shape:
        raise ShapeError(f"bce: logits {logits.shape} vs targets {targets.shape}")
    if not np.all((targets == 0) | (targets == 1)):
        raise ValueError("bce: targets must be binary")
    return targets


def bce_terms(logits, targets):
    """Elementwise ``softplus(z) - t*z`` (numerically stable), as numpy."""
    z = np.asarray(logits, dtype=np.float64)
    return np.logaddexp(0.0, z) - targets * z


def bce_with_logits_weighted(logits, targets, weights=None):
    """Mean over all cells of ``w * (softplus(z) - t*z)``.

    ``weights`` is a :class:`~viralrx.dataset.ClassWeights` (per-drug
    positive/negative multipliers) or None for unit weights.
    """
    targets = _check_targets(logits, targets)
    if weights is None:
        w = np.ones(logits.shape)
    else:
        if len(weights) != logits.shape[-1]:
            raise ShapeError(f"bce: {len(weights)} class weights for {logits.shape[-1]} outputs")
        w = np.where(targets == 1, weights.positive, weights.negative)
    n = logits.size
    out = Tensor(np.sum(w * bce_terms(logits.data, targets)) / n)

    def vjp(g):
        return (g * w * (_sigmoid(logits.data) - targets) / n,)

    record("bce_with_logits", (logits,), (out,), vjp)
    return out


def bce_mean(logits, targets):
    """Unweighted mean BCE of plain arrays (no recording)."""
    targets = np.asarray(targets, dtype=np.float64)
    return float(np.mean(bce_terms(logits, targets)))
