"""Deduplication, balancing, class weights and train/eval splits."""

import csv
import enum
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, SplitError
from .labels import LabeledExample
from .rng import stream

__all__ = [
    "LabeledExample",
    "BalanceConfig",
    "ClassWeights",
    "SplitMode",
    "SplitSpec",
    "deduplicate",
    "exclude_rare",
    "balance",
    "compute_class_weights",
    "split",
    "species_counts",
    "label_matrix",
    "write_dataset",
    "read_dataset",
]

PINNED_SPECIES = "SARS-CoV-2"


def species_counts(examples):
    return dict(sorted(Counter(e.species for e in examples).items()))


def label_matrix(examples):
    if not examples:
        return np.zeros((0, 0), dtype=np.uint8)
    return np.stack([e.labels for e in examples]).astype(np.uint8)


# ---------------------------------------------------------------------------
# deduplication


@dataclass
class DedupReport:
    key: str
    before: dict
    after: dict

    @property
    def total_before(self):
        return sum(self.before.values())

    @property
    def total_after(self):
        return sum(self.after.values())

    @property
    def reduction(self):
        return 1.0 - self.total_after / self.total_before if self.total_before else 0.0

    def as_dict(self):
        return {
            "key": self.key,
            "total_before": self.total_before,
            "total_after": self.total_after,
            "reduction": self.reduction,
            "before": self.before,
            "after": self.after,
        }


def deduplicate(examples, key="length"):
    """Keep the first example for each (species, residue length) key.

    ``key="content"`` collapses only exact residue matches instead.
    """
    if key == "length":
        keyfunc = lambda e: (e.species, len(e.residues))  # noqa: E731
    elif key == "content":
        keyfunc = lambda e: (e.species, e.residues)  # noqa: E731
    else:
        raise ConfigError(f"unknown dedup key {key!r}")
    seen = set()
    out = []
    for e in examples:
        k = keyfunc(e)
        if k in seen:
            continue
        seen.add(k)
        out.append(e)
    return out, DedupReport(key, species_counts(examples), species_counts(out))


def exclude_rare(examples, rarity_fraction=0.005):
    """Drop species holding fewer than ``rarity_fraction`` of all examples."""
    if not 0 < rarity_fraction < 1:
        raise ConfigError("rarity_fraction must lie in (0, 1)")
    counts = species_counts(examples)
    threshold = rarity_fraction * len(examples)
    excluded = sorted(s for s, c in counts.items() if c < threshold)
    drop = set(excluded)
    return [e for e in examples if e.species not in drop], excluded


# ---------------------------------------------------------------------------
# balancing


class OversampleRule(str, enum.Enum):
    CEIL = "ceil"
    NEAREST = "nearest"


@dataclass(frozen=True)
class BalanceConfig:
    """Per-species count targets.

    Species above ``upper_bound`` are undersampled to it.  Species below
    ``lower_target`` are replicated whole ``k`` times.  The default ``ceil``
    rule takes ``k = ceil(lower_target * ceil_factor / c)`` capped at
    ``replicate_cap // c``; the ``nearest`` rule picks whichever of
    ``floor/ceil(nearest_target / c)`` lands closest to ``nearest_target``.
    """

    lower_target: int = 400
    upper_bound: int = 900
    rarity_fraction: float = 0.005
    seed: int = 0
    rule: str = "ceil"
    ceil_factor: float = 1.3
    nearest_target: int = 600
    replicate_cap: int = 936

    def __post_init__(self):
        if not 0 < self.rarity_fraction < 1:
            raise ConfigError("rarity_fraction must lie in (0, 1)")
        if not 0 < self.lower_target <= self.upper_bound:
            raise ConfigError("need 0 < lower_target <= upper_bound")
        OversampleRule(self.rule)


def replication_factor(count, config):
    """Whole-set replication factor for a species with ``count`` examples."""
    if count <= 0:
        raise ValueError("species with no examples cannot be balanced")
    if count >= config.lower_target:
        return 1
    if OversampleRule(config.rule) is OversampleRule.CEIL:
        # integer target so 400 * 1.3 does not round up to 520.0000000000001
        target = round(config.lower_target * config.ceil_factor)
        k = -(-target // count)
        k = min(k, max(config.replicate_cap // count, 1))
        return max(k, 1)
    t = config.nearest_target
    candidates = {max(t // count, 1), -(-t // count)}
    valid = [k for k in candidates if k * count >= config.lower_target]
    if not valid:
        valid = [max(candidates)]
    return min(valid, key=lambda k: (abs(k * count - t), k))


@dataclass
class BalanceReport:
    species: dict = field(default_factory=dict)

    @property
    def total(self):
        return sum(v["final"] for v in self.species.values())

    def as_dict(self):
        return {"total": self.total, "species": self.species}


def balance(examples, config=BalanceConfig()):
    """Undersample common species and replicate rare ones.

    Output is ordered by (species name, original index); replicated copies of
    one example are adjacent.
    """
    by_species = {}
    for i, e in enumerate(examples):
        by_species.setdefault(e.species, []).append(i)
    out = []
    report = BalanceReport()
    for species in sorted(by_species):
        idx = by_species[species]
        c = len(idx)
        if c > config.upper_bound:
            rng = stream(config.seed, f"balance/{species}")
            chosen = np.sort(rng.choice(c, size=config.upper_bound, replace=False))
            picked = [idx[j] for j in chosen]
            out.extend(examples[i] for i in picked)
            report.species[species] = {"original": c, "final": len(picked), "mode": "undersample", "factor": 1}
            continue
        k = replication_factor(c, config)
        for i in idx:
            out.extend([examples[i]] * k)
        mode = "replicate" if k > 1 else "keep"
        report.species[species] = {"original": c, "final": c * k, "mode": mode, "factor": k}
    return out, report


# ---------------------------------------------------------------------------
# class weights


@dataclass(frozen=True)
class ClassWeights:
    positive: np.ndarray
    negative: np.ndarray

    def __post_init__(self):
        if self.positive.shape != self.negative.shape:
            raise ValueError("positive and negative weights differ in shape")

    def __len__(self):
        return len(self.positive)

    @classmethod
    def ones(cls, n):
        return cls(np.ones(n), np.ones(n))

    def scaled(self, c):
        return ClassWeights(self.positive * c, self.negative * c)


def compute_class_weights(labels, clamp=(0.05, 20.0)):
    """Two-sided inverse-frequency weights per drug.

    ``labels`` is an (N, D) binary matrix or a list of examples.  With ``P``
    positives for a drug, positives get ``N / (2P)`` and negatives
    ``N / (2(N - P))``, both clamped to ``clamp``.
    """
    if not isinstance(labels, np.ndarray):
        labels = label_matrix(labels)
    n = labels.shape[0]
    if n == 0:
        raise ValueError("cannot weight an empty dataset")
    pos = labels.sum(axis=0).astype(np.float64)
    w_pos = n / (2.0 * np.maximum(pos, 1.0))
    w_neg = n / (2.0 * np.maximum(n - pos, 1.0))
    lo, hi = clamp
    return ClassWeights(np.clip(w_pos, lo, hi), np.clip(w_neg, lo, hi))


# ---------------------------------------------------------------------------
# splits


class SplitMode(str, enum.Enum):
    RANDOM = "random"
    BY_SPECIES = "by-species"


@dataclass(frozen=True)
class SplitSpec:
    mode: SplitMode = SplitMode.RANDOM
    ratio: float = 0.8
    holdout: tuple = (PINNED_SPECIES,)
    n_random_holdouts: int = 3
    seed: int = 0
    pinned: str = PINNED_SPECIES

    def __post_init__(self):
        object.__setattr__(self, "mode", SplitMode(self.mode))
        object.__setattr__(self, "holdout", tuple(self.holdout))
        if self.mode is SplitMode.RANDOM:
            if not 0 < self.ratio < 1:
                raise ConfigError("split ratio must lie in (0, 1)")
        else:
            if not self.holdout:
                raise ConfigError("by-species split needs at least one holdout species")
            if self.pinned not in self.holdout:
                raise ConfigError(f"by-species holdout must include {self.pinned}")
            if self.n_random_holdouts < 0:
                raise ConfigError("n_random_holdouts must be >= 0")


@dataclass
class SplitReport:
    mode: str
    holdout: list
    train: dict
    eval: dict

    def as_dict(self):
        return {"mode": self.mode, "holdout": self.holdout, "train": self.train, "eval": self.eval}


def split(examples, spec):
    """Split into (train, eval, report).

    Random mode shuffles with a seeded stream and cuts at ``ratio``.
    By-species mode sends every example of the holdout species (the listed
    ones plus ``n_random_holdouts`` drawn from the rest) to eval.  Both sides
    keep input order.
    """
    n = len(examples)
    if spec.mode is SplitMode.RANDOM:
        perm = stream(spec.seed, "split/random").permutation(n)
        n_train = int(round(spec.ratio * n))
        train_idx = np.sort(perm[:n_train])
        eval_idx = np.sort(perm[n_train:])
        holdout = []
    else:
        present = set(e.species for e in examples)
        missing = [s for s in spec.holdout if s not in present]
        if missing:
            raise SplitError(f"holdout species not found: {', '.join(missing)}")
        rest = sorted(present - set(spec.holdout))
        if spec.n_random_holdouts > len(rest):
            raise SplitError("not enough species left for random holdouts")
        drawn = []
        if spec.n_random_holdouts:
            rng = stream(spec.seed, "split/holdout")
            drawn = [rest[i] for i in sorted(rng.choice(len(rest), spec.n_random_holdouts, replace=False))]
        holdout = list(spec.holdout) + drawn
        held = set(holdout)
        mask = np.array([e.species in held for e in examples], dtype=bool)
        train_idx = np.flatnonzero(~mask)
        eval_idx = np.flatnonzero(mask)
    if train_idx.size == 0 or eval_idx.size == 0:
        raise SplitError("split leaves one side empty")
    train = [examples[i] for i in train_idx]
    ev = [examples[i] for i in eval_idx]
    report = SplitReport(spec.mode.value, holdout, species_counts(train), species_counts(ev))
    return train, ev, report


# ---------------------------------------------------------------------------
# persistence

META_COLUMNS = ("sequence", "virus_name", "genbank_title", "accession")


def write_dataset(examples, path, columns):
    """Write examples as TSV: sequence, virus name, title, accession, label columns."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow([*META_COLUMNS, *columns])
        for e in examples:
            if len(e.labels) != len(columns):
                raise ValueError(f"{e.accession}: label width {len(e.labels)} != {len(columns)} columns")
            w.writerow([e.residues, e.species, e.genbank_title, e.accession, *map(int, e.labels)])


def read_dataset(path):
    """Inverse of :func:`write_dataset`; returns ``(examples, label_columns)``.

    Examples of one species share a single read-only label vector.
    """
    out = []
    shared = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t")
        header = next(reader)
        if tuple(header[:4]) != META_COLUMNS:
            raise ValueError(f"{path}: unexpected dataset header")
        columns = header[4:]
        for row in reader:
            seq, species, title, acc = row[:4]
            key = (species, tuple(row[4:]))
            vec = shared.get(key)
            if vec is None:
                vec = np.array([int(x) for x in row[4:]], dtype=np.uint8)
                vec.setflags(write=False)
                shared[key] = vec
            out.append(LabeledExample(acc, seq, species, vec, title))
    return out, columns


def profile_table(stages):
    """Merge per-stage species counts into rows ``(species, count_stage1, ...)``.

    ``stages`` maps a stage name to a ``{species: count}`` dict; species
    missing from a stage get 0.
    """
    names = list(stages)
    species = sorted(set().union(*(stages[n] for n in names)))
    last = names[-1]
    species.sort(key=lambda s: (-stages[last].get(s, 0), s))
    return names, [(s, *(stages[n].get(s, 0) for n in names)) for s in species]
