"""Training loop, micro-averaged metrics and multi-run aggregation."""

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from .dataset import compute_class_weights
from .errors import DivergenceError
from .rng import stream
from .tensor import Adam, Tape, backward, bce_with_logits_weighted
from .tensor.loss import bce_terms
from .tensor.ops import _sigmoid
from .validation import check_threshold

logger = logging.getLogger(__name__)

DEFAULT_LR = {"lstm": 1e-3, "cnn": 1e-2}
METRICS = ("accuracy", "precision", "recall", "f1", "loss")
Z95 = 1.96


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 128
    lr: float = 1e-3
    seed: int = 0
    threshold: float = 0.5
    class_weighting: bool = True
    check_finite: bool = False
    eval_batch_size: int = 256

    def __post_init__(self):
        if self.epochs <= 0 or self.batch_size <= 0:
            raise ValueError("epochs and batch_size must be positive")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        check_threshold(self.threshold)


@dataclass
class MetricsSnapshot:
    accuracy: float
    precision: float
    recall: float
    f1: float
    loss: float
    side: str = "validation"
    epoch: int = 0
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def as_dict(self):
        return asdict(self)


def confusion_counts(probabilities, targets, threshold):
    pred = np.asarray(probabilities) >= threshold
    truth = np.asarray(targets).astype(bool)
    tp = int(np.sum(pred & truth))
    fp = int(np.sum(pred & ~truth))
    fn = int(np.sum(~pred & truth))
    tn = int(np.sum(~pred & ~truth))
    return tp, fp, fn, tn


def metrics_from_counts(tp, fp, fn, tn, loss, side="validation", epoch=0):
    """Micro metrics; 0/0 ratios are defined as 0."""
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    total = tp + fp + fn + tn
    accuracy = (tp + tn) / total if total else 0.0
    return MetricsSnapshot(accuracy, precision, recall, f1, float(loss), side, epoch, tp, fp, fn, tn)


def metrics_from_logits(logits, targets, threshold=0.5, side="validation", epoch=0):
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if logits.size == 0:
        raise ValueError("cannot evaluate an empty dataset")
    counts = confusion_counts(_sigmoid(logits), targets, threshold)
    loss = float(np.mean(bce_terms(logits, targets)))
    return metrics_from_counts(*counts, loss, side=side, epoch=epoch)


def predict_logits(network, ids, batch_size=256):
    """Eval-mode logits for an id matrix, batched."""
    ids = np.asarray(ids)
    if len(ids) == 0:
        raise ValueError("cannot predict on an empty dataset")
    out = [network.forward(network.encode(ids[i : i + batch_size])).data for i in range(0, len(ids), batch_size)]
    return np.concatenate(out, axis=0)


def evaluate(network, ids, targets, threshold=0.5, batch_size=256, side="validation", epoch=0):
    """Micro-averaged metrics over every (example, drug) cell.

    Loss is the unweighted mean BCE.
    """
    check_threshold(threshold)
    logits = predict_logits(network, ids, batch_size)
    return metrics_from_logits(logits, targets, threshold, side=side, epoch=epoch)


@dataclass
class RunAggregate:
    n: int
    mean: dict
    half_width: dict

    def as_dict(self):
        return {"n": self.n, "mean": self.mean, "half_width": self.half_width}

    def format(self):
        return "  ".join(f"{m}={self.mean[m]:.4f}±{self.half_width[m]:.2g}" for m in METRICS)


def mean_ci(values):
    """Mean and normal-approximation 95% half-width ``1.96 * s / sqrt(n)``."""
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    if n < 2:
        raise ValueError("need at least two runs for a confidence interval")
    return float(values.mean()), float(Z95 * values.std(ddof=1) / math.sqrt(n))


def aggregate_runs(snapshots):
    snapshots = list(snapshots)
    if len(snapshots) < 2:
        raise ValueError("aggregate_runs needs n >= 2 snapshots")
    mean, half = {}, {}
    for m in METRICS:
        mean[m], half[m] = mean_ci([getattr(s, m) for s in snapshots])
    return RunAggregate(len(snapshots), mean, half)


class MetricsLog:
    """Append-only JSON-lines metrics log (one object per snapshot)."""

    def __init__(self, path, run_id=0):
        self.path = path
        self.run_id = run_id

    def __call__(self, snap):
        rec = {"run": self.run_id, "epoch": snap.epoch, "side": snap.side}
        rec.update({m: getattr(snap, m) for m in METRICS})
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def write_curves(histories, path):
    """Per-epoch curves as TSV; ``histories`` maps run id to snapshot lists."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["run", "epoch", "side", *METRICS])
        for run, hist in histories.items():
            for s in hist:
                w.writerow([run, s.epoch, s.side, *(repr(getattr(s, m)) for m in METRICS)])


def train(network, ids, targets, config, eval_data=None, class_weights=None, log=None):
    """Fit ``network`` in place with weighted BCE and Adam.

    ``ids`` is the training id matrix and ``targets`` its binary label matrix.
    Class weights default to those of the training labels.  Each epoch uses
    a fresh seeded shuffle and keeps the final partial batch.  Returns the
    per-epoch snapshots (train side accumulated over the epoch's batches,
    validation side from :func:`evaluate` when ``eval_data`` is given).
    """
    ids = np.asarray(ids)
    targets = np.asarray(targets, dtype=np.float64)
    n = len(ids)
    if n == 0:
        raise ValueError("empty training set")
    if class_weights is None and config.class_weighting:
        class_weights = compute_class_weights(targets.astype(np.uint8))
    params = network.parameters()
    opt = Adam(params, lr=config.lr)
    rng = stream(config.seed, "train/shuffle")
    history = []
    for epoch in range(1, config.epochs + 1):
        perm = rng.permutation(n)
        tp = fp = fn = tn = 0
        loss_sum = 0.0
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            batch_y = targets[idx]
            with Tape(check_finite=config.check_finite) as tape:
                logits = network.forward(network.encode(ids[idx]))
                loss = bce_with_logits_weighted(logits, batch_y, class_weights)
            if not np.isfinite(loss.data):
                raise DivergenceError(f"non-finite loss at epoch {epoch}, batch starting {start}")
            backward(tape, loss, params)
            opt.step()
            c = confusion_counts(_sigmoid(logits.data), batch_y, config.threshold)
            tp, fp, fn, tn = tp + c[0], fp + c[1], fn + c[2], tn + c[3]
            loss_sum += float(np.sum(bce_terms(logits.data, batch_y)))
        snap = metrics_from_counts(tp, fp, fn, tn, loss_sum / targets.size, side="train", epoch=epoch)
        history.append(snap)
        if log is not None:
            log(snap)
        msg = f"epoch {epoch:>3} train f1={snap.f1:.4f} loss={snap.loss:.4f}"
        if eval_data is not None:
            ev = evaluate(network, *eval_data, threshold=config.threshold,
                          batch_size=config.eval_batch_size, epoch=epoch)
            history.append(ev)
            if log is not None:
                log(ev)
            msg += f"  val f1={ev.f1:.4f} loss={ev.loss:.4f}"
        logger.info(msg)
    return history
