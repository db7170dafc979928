"""Synthetic corpus with motif-determined labels.

Each species owns a few width-3 motifs built from rare residues, planted into
random background sequences.  Drug labels are a function of species only, so
a model that finds the motifs can separate the classes.  Two structural
features support leave-species-out checks:

* ``TWIN`` reuses the motifs and drug phases of ``SIBLING``;
* ``SARS-CoV-2`` has motifs and drugs that no other species shares.

The output files use the same formats the ingest stage reads (FASTA,
metadata CSV, DrugVirus CSV).
"""

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import DrugVirusEntry, RawSequence, SequenceMetadata, write_fasta
from .labels import PhaseStatus
from .rng import stream

PINNED = "SARS-CoV-2"
SIBLING = "Synvirus zeta"
TWIN = "Synvirus eta"
SPECIES = (
    PINNED,
    "Synvirus alpha",
    "Synvirus beta",
    "Synvirus gamma",
    "Synvirus delta",
    "Synvirus epsilon",
    SIBLING,
    TWIN,
)
DRUGS = (
    "Aclavudine", "Berivir", "Cetamivir", "Doravirine-S", "Elbavir", "Famtrovir",
    "Galivudine", "Helicostat", "Imiquavir", "Josamivir", "Kelvudine", "Lotravir",
    "Mavorixafor-S", "Nelfinavir-S", "Orlistavir", "Pexavudine",
)
RARE = "WCHM"
COMMON = "ADEFGIKLNPQRSTVY"

# species -> {drug: phases}; CellCulture-only pairs are dropped by V3 labels
_P2, _P3, _AP, _CC = PhaseStatus.PhaseII, PhaseStatus.PhaseIII, PhaseStatus.Approved, PhaseStatus.CellCulture
PHASE_TABLE = {
    PINNED: {"Orlistavir": {_P2}, "Pexavudine": {_CC, _AP}, "Aclavudine": {_CC}},
    "Synvirus alpha": {"Aclavudine": {_AP}, "Berivir": {_P3}, "Cetamivir": {_CC}},
    "Synvirus beta": {"Berivir": {_P2}, "Doravirine-S": {_AP}, "Nelfinavir-S": {_CC}},
    "Synvirus gamma": {"Elbavir": {_P3, _AP}, "Famtrovir": {_P2}, "Galivudine": {_CC}},
    "Synvirus delta": {"Galivudine": {_AP}, "Helicostat": {_P2}, "Aclavudine": {_P3}},
    "Synvirus epsilon": {"Imiquavir": {_P2}, "Josamivir": {_AP}, "Berivir": {_CC}},
    SIBLING: {"Kelvudine": {_AP}, "Lotravir": {_P3}, "Mavorixafor-S": {_P2}},
    TWIN: {"Kelvudine": {_AP}, "Lotravir": {_P3}, "Mavorixafor-S": {_P2}},
}


@dataclass(frozen=True)
class SyntheticSpec:
    n_per_species: int = 400
    min_len: int = 120
    max_len: int = 500
    motifs_per_species: int = 3
    min_copies: int = 3
    max_copies: int = 6
    rare_rate: float = 0.005
    seed: int = 0


def species_motifs(seed=0, per_species=3):
    """Motifs per species; the twin gets its sibling's set."""
    rng = stream(seed, "synthetic/motifs")
    pool = [a + b + c for a in RARE for b in COMMON for c in RARE]
    order = rng.permutation(len(pool))
    owners = [s for s in SPECIES if s != TWIN]
    motifs = {}
    for i, s in enumerate(owners):
        motifs[s] = tuple(pool[j] for j in order[i * per_species : (i + 1) * per_species])
    motifs[TWIN] = motifs[SIBLING]
    return motifs


def _background(rng, n, rare_rate):
    p = np.full(len(RARE) + len(COMMON), 0.0)
    p[: len(RARE)] = rare_rate
    p[len(RARE) :] = (1.0 - rare_rate * len(RARE)) / len(COMMON)
    letters = np.array(list(RARE + COMMON))
    return letters[rng.choice(len(letters), size=n, p=p)]


def _sequence(rng, motifs, spec):
    length = int(rng.integers(spec.min_len, spec.max_len + 1))
    seq = _background(rng, length, spec.rare_rate)
    copies = int(rng.integers(spec.min_copies, spec.max_copies + 1))
    # non-overlapping slots of width 3
    slots = rng.choice(length // 3, size=copies, replace=False) * 3
    for s in slots:
        seq[s : s + 3] = list(motifs[int(rng.integers(len(motifs)))])
    return "".join(seq)


def generate(spec=SyntheticSpec()):
    """Return ``(sequences, metadata, drugvirus_entries, motifs)``."""
    motifs = species_motifs(spec.seed, spec.motifs_per_species)
    sequences, metadata = [], []
    for k, species in enumerate(SPECIES):
        rng = stream(spec.seed, f"synthetic/{species}")
        for i in range(spec.n_per_species):
            acc = f"SYN{k}{i:05d}.1"
            sequences.append(RawSequence(acc, _sequence(rng, motifs[species], spec), "synthetic"))
            metadata.append(SequenceMetadata(acc, species, f"synthetic protein {i % 7}", None, None))
    entries = [
        DrugVirusEntry(drug, virus, frozenset(phases))
        for virus, drugs in PHASE_TABLE.items()
        for drug, phases in drugs.items()
    ]
    return sequences, metadata, entries, motifs


def write_corpus(directory, spec=SyntheticSpec()):
    """Write ``sequences.fasta``, ``metadata.csv`` and ``drugvirus.csv``; returns the paths."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    sequences, metadata, entries, _ = generate(spec)
    paths = {
        "sequences": out / "sequences.fasta",
        "metadata": out / "metadata.csv",
        "drugvirus": out / "drugvirus.csv",
    }
    write_fasta(sequences, paths["sequences"])
    with open(paths["metadata"], "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["Accession", "Species", "GenBank_Title"])
        for m in metadata:
            w.writerow([m.accession, m.species_raw, m.genbank_title])
    with open(paths["drugvirus"], "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["Drug", "Virus", "Phase"])
        for e in entries:
            for phase in sorted(e.phases):
                w.writerow([e.drug, e.virus, phase.name])
    return paths
