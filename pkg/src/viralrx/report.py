"""Candidate drug lists, per-species ranking tables and activation dumps."""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .tensor import container
from .validation import check_threshold

SELECTION_THRESHOLD = 0.2
Z95 = 1.96
PREDICTION_COLUMNS = ("accession", "sequence", "virus_name", "genbank_title", "antivirals", "probabilities")
SUMMARY_COLUMNS = ("antiviral", "count", "mean_probability", "half_width")


@dataclass
class PredictionRow:
    accession: str
    species: str
    genbank_title: str = ""
    drugs: list = field(default_factory=list)  # (name, probability), descending
    sequence: str = ""

    @property
    def drug_names(self):
        return [d for d, _ in self.drugs]


@dataclass(frozen=True)
class DrugSummary:
    drug: str
    count: int
    mean_probability: float
    half_width: float | None  # None when count == 1

    def format_ci(self, digits=3):
        if self.half_width is None:
            return f"{self.mean_probability:.{digits}f} ± n/a"
        return f"{self.mean_probability:.{digits}f} ± {self.half_width:.2g}"


def postprocess(probabilities, drug_names, threshold=SELECTION_THRESHOLD, meta=None):
    """Select drugs with ``p >= threshold`` for each row of ``probabilities``.

    ``meta`` is an optional sequence of ``(accession, species, genbank_title,
    sequence)`` tuples aligned with the rows.  Every row yields a
    :class:`PredictionRow`, possibly with an empty drug list.  Ties in
    probability keep registry order.
    """
    threshold = check_threshold(threshold)
    probs = np.asarray(probabilities, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[1] != len(drug_names):
        raise ValueError(f"probability matrix {probs.shape} does not match {len(drug_names)} drugs")
    rows = []
    for i, p in enumerate(probs):
        hit = np.flatnonzero(p >= threshold)
        order = hit[np.argsort(-p[hit], kind="stable")]
        m = meta[i] if meta is not None else (str(i), "", "", "")
        drugs = [(drug_names[j], float(p[j])) for j in order]
        rows.append(PredictionRow(m[0], m[1], m[2], drugs, m[3] if len(m) > 3 else ""))
    return rows


def summarize(rows, top_k=None):
    """Count and mean probability per drug over one species' rows.

    Rows from several runs are simply concatenated, so a drug can be counted
    more than once per sequence.  Ranked by count, then mean, then name.
    """
    rows = list(rows)
    if not rows:
        raise ValueError("summarize needs at least one row")
    species = {r.species for r in rows}
    if len(species) > 1:
        raise ValueError(f"rows span several species: {sorted(species)}")
    seen = {}
    for r in rows:
        for drug, p in r.drugs:
            seen.setdefault(drug, []).append(p)
    out = []
    for drug, ps in seen.items():
        n = len(ps)
        mean = math.fsum(ps) / n
        half = None
        if n > 1:
            s = math.sqrt(math.fsum((p - mean) ** 2 for p in ps) / (n - 1))
            half = Z95 * s / math.sqrt(n)
        out.append(DrugSummary(drug, n, mean, half))
    out.sort(key=lambda d: (-d.count, -d.mean_probability, d.drug))
    return out[:top_k] if top_k is not None else out


def write_predictions(rows, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(PREDICTION_COLUMNS)
        for r in rows:
            w.writerow([
                r.accession, r.sequence, r.species, r.genbank_title,
                ", ".join(d for d, _ in r.drugs),
                ", ".join(repr(p) for _, p in r.drugs),
            ])


def read_predictions(path):
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh, delimiter="\t")
        if tuple(reader.fieldnames or ()) != PREDICTION_COLUMNS:
            raise ValueError(f"{path}: unexpected prediction columns {reader.fieldnames}")
        for rec in reader:
            names = [s for s in rec["antivirals"].split(", ") if s]
            probs = [float(s) for s in rec["probabilities"].split(", ") if s]
            if len(names) != len(probs):
                raise ValueError(f"{path}: {rec['accession']} has {len(names)} drugs, {len(probs)} probabilities")
            rows.append(PredictionRow(rec["accession"], rec["virus_name"], rec["genbank_title"],
                                      list(zip(names, probs)), rec["sequence"]))
    return rows


def write_summary(summaries, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for s in summaries:
            half = "n/a" if s.half_width is None else repr(s.half_width)
            w.writerow([s.drug, s.count, repr(s.mean_probability), half])


def format_summary(summaries, title=None):
    width = max([len(s.drug) for s in summaries] + [9])
    lines = [title] if title else []
    lines.append(f"{'Antiviral':<{width}}  {'Count':>6}  Mean Probability")
    lines += [f"{s.drug:<{width}}  {s.count:>6}  {s.format_ci()}" for s in summaries]
    return "\n".join(lines)


def dump_activations(network, encoded, path=None, lengths=None):
    """Every intermediate activation for one encoded sequence.

    ``encoded`` is a single example without a batch axis (ids for the LSTM,
    a ``max_len x 28`` one-hot image for the CNN).  Arrays keep a leading
    batch axis of 1 so they can be fed back through ``network.run(start=...)``.
    """
    batch = np.asarray(encoded)[None]
    acts = network.run(batch, lengths=lengths)
    arrays = {name: t.data for name, t in acts.items()}
    if path is not None:
        order = ["input"] + [n for n, _ in network.stages()]
        meta = {
            "kind": network.kind,
            "network": network.config_dict(),
            "layers": [{"name": n, "shape": list(arrays[n].shape)} for n in order],
        }
        container.save(path, arrays, meta)
    return arrays
