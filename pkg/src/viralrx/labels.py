"""Virus -> antiviral label vectors.

Three encodings are supported:

``V1``
    any recorded drug/virus interaction is a positive.
``V2``
    one slot per (drug, phase), drug-major then phase-minor.  Trial phases are
    assumed hierarchical, so every phase up to the highest one observed is set.
``V3``
    a drug is positive only if it reached Phase II or beyond.  This is the
    default training target.
"""

import csv
import enum
import hashlib
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import LabelError

MAX_DRUGS = 126


class PhaseStatus(enum.IntEnum):
    CellCulture = 0
    PrimaryCells = 1
    AnimalModel = 2
    PhaseI = 3
    PhaseII = 4
    PhaseIII = 5
    PhaseIV = 6
    Approved = 7

    @classmethod
    def parse(cls, text):
        """Parse a phase label as found in DrugVirus exports (lenient spelling)."""
        key = re.sub(r"[^a-z0-9]", "", str(text).lower())
        try:
            return _PHASE_SPELLINGS[key]
        except KeyError:
            raise ValueError(f"unknown phase label {text!r}") from None


_PHASE_SPELLINGS = {
    "cellculture": PhaseStatus.CellCulture,
    "cellcultures": PhaseStatus.CellCulture,
    "cellculturescocultures": PhaseStatus.CellCulture,
    "cellculturecoculture": PhaseStatus.CellCulture,
    "primarycells": PhaseStatus.PrimaryCells,
    "primarycellsorganoids": PhaseStatus.PrimaryCells,
    "organoids": PhaseStatus.PrimaryCells,
    "animalmodel": PhaseStatus.AnimalModel,
    "animalmodels": PhaseStatus.AnimalModel,
    "phasei": PhaseStatus.PhaseI,
    "phase1": PhaseStatus.PhaseI,
    "phaseii": PhaseStatus.PhaseII,
    "phase2": PhaseStatus.PhaseII,
    "phaseiii": PhaseStatus.PhaseIII,
    "phase3": PhaseStatus.PhaseIII,
    "phaseiv": PhaseStatus.PhaseIV,
    "phase4": PhaseStatus.PhaseIV,
    "approved": PhaseStatus.Approved,
}
N_PHASES = len(PhaseStatus)


class LabelVersion(str, enum.Enum):
    V1 = "V1"
    V2 = "V2"
    V3 = "V3"

    @classmethod
    def coerce(cls, value):
        if isinstance(value, cls):
            return value
        text = str(value).upper()
        if not text.startswith("V"):
            text = "V" + text
        return cls(text)


class DrugRegistry:
    """Ordered drug names with a stable name -> index mapping.

    Built from the union of drug names, sorted case-insensitively (the column
    order of the DrugVirus pivot).  At most 126 drugs are allowed.
    """

    def __init__(self, names, max_size=MAX_DRUGS):
        names = list(names)
        if len(set(names)) != len(names):
            raise LabelError("duplicate drug names in registry")
        if max_size is not None and len(names) > max_size:
            raise LabelError(f"{len(names)} distinct drugs exceed the registry limit of {max_size}")
        self.names = tuple(names)
        self.index = {n: i for i, n in enumerate(self.names)}

    @classmethod
    def from_entries(cls, entries, max_size=MAX_DRUGS):
        drugs = sorted({e.drug for e in entries}, key=lambda s: (s.casefold(), s))
        return cls(drugs, max_size=max_size)

    def __len__(self):
        return len(self.names)

    def __iter__(self):
        return iter(self.names)

    def __eq__(self, other):
        return isinstance(other, DrugRegistry) and self.names == other.names

    def digest(self):
        return hashlib.sha256("\n".join(self.names).encode("utf-8")).hexdigest()

    def __repr__(self):
        return f"DrugRegistry({len(self)} drugs)"


@dataclass
class LabelDictionary:
    version: LabelVersion
    registry: DrugRegistry
    vectors: dict = field(default_factory=dict)

    @property
    def width(self):
        n = len(self.registry)
        return n * N_PHASES if self.version is LabelVersion.V2 else n

    def column_names(self):
        if self.version is LabelVersion.V2:
            return [f"{d}|{p.name}" for d in self.registry for p in PhaseStatus]
        return list(self.registry)

    def __getitem__(self, virus):
        return self.vectors[virus]

    def __contains__(self, virus):
        return virus in self.vectors

    def viruses(self):
        return sorted(self.vectors)

    def drug_view(self, vector):
        """Collapse a V2 vector to one slot per drug (any phase set)."""
        if self.version is not LabelVersion.V2:
            return vector
        return vector.reshape(len(self.registry), N_PHASES).max(axis=1)


def build_label_dictionary(entries, version=LabelVersion.V3, registry=None, viruses=None):
    """Encode DrugVirus entries as per-virus binary vectors.

    Parameters
    ----------
    entries : iterable of DrugVirusEntry
    version : LabelVersion or str
    registry : DrugRegistry, optional
        Defaults to the sorted union of drug names in ``entries``.
    viruses : iterable of str, optional
        Canonical virus list.  Entries naming any other virus are rejected.
    """
    version = LabelVersion.coerce(version)
    entries = list(entries)
    if registry is None:
        registry = DrugRegistry.from_entries(entries)
    if viruses is not None:
        viruses = set(viruses)
        unknown = sorted({e.virus for e in entries} - viruses)
        if unknown:
            raise LabelError(f"virus(es) absent from canonical list: {', '.join(unknown)}")
    else:
        viruses = {e.virus for e in entries}

    n = len(registry)
    width = n * N_PHASES if version is LabelVersion.V2 else n
    vectors = {v: np.zeros(width, dtype=np.uint8) for v in viruses}
    for e in entries:
        if e.drug not in registry.index:
            raise LabelError(f"drug {e.drug!r} missing from registry")
        if not e.phases:
            raise LabelError(f"entry ({e.drug}, {e.virus}) has no phases")
        d = registry.index[e.drug]
        top = max(e.phases)
        vec = vectors[e.virus]
        if version is LabelVersion.V1:
            vec[d] = 1
        elif version is LabelVersion.V2:
            vec[d * N_PHASES : d * N_PHASES + int(top) + 1] = 1
        elif top >= PhaseStatus.PhaseII:
            vec[d] = 1
    for vec in vectors.values():
        vec.setflags(write=False)
    return LabelDictionary(version, registry, vectors)


@dataclass(frozen=True, eq=False)
class LabeledExample:
    accession: str
    residues: str
    species: str
    labels: np.ndarray
    genbank_title: str = ""

    def __len__(self):
        return len(self.residues)


def attach_labels(records, dictionary):
    """Pair each merged record with its species' label vector.

    Returns the examples and a coverage report listing species whose vector
    is all zeros.  The vector object is shared by all records of a species.
    """
    out = []
    empty = {}
    for r in records:
        try:
            vec = dictionary[r.species]
        except KeyError:
            raise LabelError(f"species {r.species!r} missing from label dictionary") from None
        if not vec.any():
            empty[r.species] = empty.get(r.species, 0) + 1
        out.append(LabeledExample(r.accession, r.residues, r.species, vec, r.genbank_title))
    coverage = {"all_zero_species": dict(sorted(empty.items()))}
    return out, coverage


def write_label_dictionary(dictionary, path):
    """Persist as a virus x drug grid; first line carries the version tag."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# version={dictionary.version.value}\n")
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["virus", *dictionary.column_names()])
        for virus in dictionary.viruses():
            w.writerow([virus, *map(int, dictionary[virus])])


def read_label_dictionary(path):
    with open(path, encoding="utf-8", newline="") as fh:
        first = fh.readline().strip()
        m = re.fullmatch(r"#\s*version=(V[123])", first)
        if not m:
            raise LabelError(f"{path}: missing version tag")
        version = LabelVersion(m.group(1))
        reader = csv.reader(fh, delimiter="\t")
        header = next(reader)[1:]
        if version is LabelVersion.V2:
            drugs = list(dict.fromkeys(h.rsplit("|", 1)[0] for h in header))
        else:
            drugs = header
        registry = DrugRegistry(drugs)
        vectors = {}
        for row in reader:
            vec = np.array([int(x) for x in row[1:]], dtype=np.uint8)
            vec.setflags(write=False)
            vectors[row[0]] = vec
    return LabelDictionary(version, registry, vectors)
