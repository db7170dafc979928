"""Parsing and merging of the source files.

Three inputs feed the pipeline: a FASTA file of protein sequences, a
delimited metadata table keyed by accession, and the DrugVirus drug/virus
trial-phase table.  Species names in the metadata are mapped onto DrugVirus
virus names through an editable alias table, and the sequence and metadata
components are inner-joined on accession.
"""

import csv
import io
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import alphabet
from .errors import (
    DrugVirusFormatError,
    FastaFormatError,
    MetadataFormatError,
    UnmappedSpeciesError,
)
from .labels import PhaseStatus

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RawSequence:
    accession: str
    residues: str
    source_tag: str = "main"


@dataclass(frozen=True)
class SequenceMetadata:
    accession: str
    species_raw: str
    genbank_title: str = ""
    collection_date: str | None = None
    study_id: str | None = None


@dataclass(frozen=True)
class DrugVirusEntry:
    drug: str
    virus: str
    phases: frozenset

    @property
    def max_phase(self):
        return max(self.phases)


@dataclass(frozen=True)
class MergedRecord:
    accession: str
    residues: str
    species: str
    genbank_title: str = ""


@dataclass
class MergeReport:
    n_sequences: int = 0
    n_metadata: int = 0
    matched: int = 0
    unmatched_sequences: int = 0
    unmatched_metadata: int = 0
    duplicate_metadata: list = field(default_factory=list)
    dropped_unmapped: dict = field(default_factory=dict)
    dropped_not_in_drugvirus: dict = field(default_factory=dict)
    kept: int = 0

    @property
    def dropped(self):
        return sum(self.dropped_unmapped.values()) + sum(
            self.dropped_not_in_drugvirus.values()
        )

    def as_dict(self):
        return {
            "n_sequences": self.n_sequences,
            "n_metadata": self.n_metadata,
            "matched": self.matched,
            "unmatched_sequences": self.unmatched_sequences,
            "unmatched_metadata": self.unmatched_metadata,
            "duplicate_metadata": list(self.duplicate_metadata),
            "dropped_unmapped": dict(sorted(self.dropped_unmapped.items())),
            "dropped_not_in_drugvirus": dict(
                sorted(self.dropped_not_in_drugvirus.items())
            ),
            "dropped": self.dropped,
            "kept": self.kept,
        }


def _open_text(source):
    """Accept a path, raw text, bytes, or an open (text or binary) handle."""
    if isinstance(source, Path):
        return open(source, encoding="utf-8", newline="")
    if isinstance(source, bytes):
        return io.StringIO(source.decode("utf-8"))
    if isinstance(source, str):
        return io.StringIO(source)
    if isinstance(source, (io.BufferedIOBase, io.RawIOBase)):
        return io.TextIOWrapper(source, encoding="utf-8", newline="")
    return source


# ---------------------------------------------------------------------------
# FASTA


def parse_fasta(source, source_tag="main"):
    """Parse FASTA text into a list of :class:`RawSequence`.

    ``source`` may be a :class:`~pathlib.Path`, a string or bytes holding the
    file contents, or an open handle.  The accession is the first
    whitespace-delimited token of each header; multi-line bodies are joined
    and upper-cased.
    """
    handle = _open_text(source)
    records = []
    seen = set()
    accession = None
    chunks = []

    def flush():
        if accession is None:
            return
        residues = "".join(chunks).upper()
        if not residues:
            raise FastaFormatError(f"empty body for {accession}")
        alphabet.validate(residues, accession)
        records.append(RawSequence(accession, residues, source_tag))

    try:
        for lineno, line in enumerate(handle, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith(">"):
                flush()
                parts = line[1:].split(None, 1)
                if not parts:
                    raise FastaFormatError(f"line {lineno}: header without accession")
                accession = parts[0]
                if accession in seen:
                    raise FastaFormatError(f"duplicate accession {accession}")
                seen.add(accession)
                chunks = []
            else:
                if accession is None:
                    raise FastaFormatError(f"line {lineno}: sequence data before first header")
                chunks.append("".join(line.split()))
        flush()
    finally:
        if isinstance(source, Path):
            handle.close()
    return records


def format_fasta(records, width=60):
    out = []
    for rec in records:
        out.append(f">{rec.accession}\n")
        for i in range(0, len(rec.residues), width):
            out.append(rec.residues[i : i + width] + "\n")
    return "".join(out)


def write_fasta(records, path, width=60):
    Path(path).write_text(format_fasta(records, width), encoding="utf-8")


# ---------------------------------------------------------------------------
# delimited tables


def _find_column(header, names):
    lowered = [h.strip().lower() for h in header]
    for name in names:
        if name in lowered:
            return lowered.index(name)
    return None


def _read_rows(source, delimiter):
    handle = _open_text(source)
    try:
        rows = list(csv.reader(handle, delimiter=delimiter))
    finally:
        if isinstance(source, Path):
            handle.close()
    # drop fully blank lines, remember the original line numbers
    return [(i, r) for i, r in enumerate(rows, 1) if any(c.strip() for c in r)]


_ACCESSION = ("accession", "accession_id", "accession id")
_SPECIES = ("species",)
_TITLE = ("genbank_title", "genbank title", "title")
_DATE = ("collection_date", "collection date")
_STUDY = ("study_id", "study id", "bioproject")


def parse_metadata(source, delimiter=","):
    """Parse a metadata table; ``Accession`` and ``Species`` columns are mandatory."""
    rows = _read_rows(source, delimiter)
    if not rows:
        raise MetadataFormatError("metadata table is empty")
    _, header = rows[0]
    idx_acc = _find_column(header, _ACCESSION)
    idx_sp = _find_column(header, _SPECIES)
    missing = [n for n, i in (("Accession", idx_acc), ("Species", idx_sp)) if i is None]
    if missing:
        raise MetadataFormatError(f"missing mandatory column(s): {', '.join(missing)}")
    idx_title = _find_column(header, _TITLE)
    idx_date = _find_column(header, _DATE)
    idx_study = _find_column(header, _STUDY)

    def opt(row, i):
        if i is None:
            return None
        value = row[i].strip()
        return value or None

    out = []
    for lineno, row in rows[1:]:
        if len(row) != len(header):
            raise MetadataFormatError(
                f"row {lineno}: expected {len(header)} fields, got {len(row)}"
            )
        acc = row[idx_acc].strip()
        species = row[idx_sp].strip()
        if not acc:
            raise MetadataFormatError(f"row {lineno}: empty Accession")
        if not species:
            raise MetadataFormatError(f"row {lineno}: empty Species")
        out.append(
            SequenceMetadata(
                accession=acc,
                species_raw=species,
                genbank_title=opt(row, idx_title) or "",
                collection_date=opt(row, idx_date),
                study_id=opt(row, idx_study),
            )
        )
    return out


_DRUG = ("drug", "drug name", "drug_name", "compound")
_VIRUS = ("virus", "virus name", "virus_name")
_PHASE = ("phase", "status", "trial phase", "trial_phase")


def parse_drugvirus(source, delimiter=","):
    """Parse the DrugVirus table into one entry per (drug, virus) pair.

    Mandatory columns are ``Drug``, ``Virus`` and ``Phase`` (``Status`` is
    accepted as a synonym).  Repeated pairs are folded by taking the union of
    their phases.  Entries come back in first-seen order.
    """
    rows = _read_rows(source, delimiter)
    if not rows:
        raise DrugVirusFormatError("DrugVirus table is empty")
    _, header = rows[0]
    idx = [_find_column(header, names) for names in (_DRUG, _VIRUS, _PHASE)]
    missing = [n for n, i in zip(("Drug", "Virus", "Phase"), idx) if i is None]
    if missing:
        raise DrugVirusFormatError(f"missing mandatory column(s): {', '.join(missing)}")
    i_drug, i_virus, i_phase = idx

    folded = {}
    for lineno, row in rows[1:]:
        if len(row) != len(header):
            raise DrugVirusFormatError(
                f"row {lineno}: expected {len(header)} fields, got {len(row)}"
            )
        drug, virus = row[i_drug].strip(), row[i_virus].strip()
        if not drug or not virus:
            raise DrugVirusFormatError(f"row {lineno}: empty drug or virus name")
        try:
            phase = PhaseStatus.parse(row[i_phase])
        except ValueError as exc:
            raise DrugVirusFormatError(f"row {lineno}: {exc}") from None
        folded.setdefault((drug, virus), set()).add(phase)
    return [DrugVirusEntry(d, v, frozenset(p)) for (d, v), p in folded.items()]


# ---------------------------------------------------------------------------
# species names


class SpeciesAliasTable:
    """Raw species name -> canonical DrugVirus virus name.

    ``canonical`` is the set of valid target names (the DrugVirus virus list).
    Alias rows whose target is not canonical are discarded with a warning so
    that :func:`normalize_species` is idempotent.
    """

    def __init__(self, mapping, canonical=None, warn=True):
        mapping = dict(mapping)
        if canonical is not None:
            canonical = frozenset(canonical)
            stray = sorted({v for v in mapping.values() if v not in canonical})
            if stray:
                (logger.warning if warn else logger.debug)(
                    "ignoring %d alias target(s) absent from the virus list: %s",
                    len(stray),
                    ", ".join(stray),
                )
            mapping = {k: v for k, v in mapping.items() if v in canonical}
        else:
            canonical = frozenset(mapping.values())
        self.mapping = mapping
        self.canonical = canonical

    def restrict(self, canonical):
        """Return a copy validated against ``canonical``."""
        return SpeciesAliasTable(self.mapping, canonical, warn=False)

    def __len__(self):
        return len(self.mapping)

    def __repr__(self):
        return f"SpeciesAliasTable({len(self.mapping)} aliases, {len(self.canonical)} canonical)"


def parse_alias_table(source, delimiter="\t"):
    """Read a two-column ``raw<TAB>canonical`` table; ``#`` starts a comment."""
    mapping = {}
    for lineno, row in _read_rows(source, delimiter):
        if row[0].lstrip().startswith("#"):
            continue
        if len(row) != 2:
            raise MetadataFormatError(f"alias table line {lineno}: expected 2 fields")
        raw, canon = row[0].strip(), row[1].strip()
        if raw.lower() == "raw" and canon.lower() == "canonical":
            continue
        if raw in mapping and mapping[raw] != canon:
            raise MetadataFormatError(f"alias table line {lineno}: conflicting entry for {raw!r}")
        mapping[raw] = canon
    return mapping


def default_alias_mapping():
    text = resources.files("viralrx.data").joinpath("species_aliases.tsv").read_text("utf-8")
    return parse_alias_table(text)


def load_alias_table(path=None, canonical=None):
    """Alias table from ``path``, or the bundled one.

    The bundled table covers many viruses, so targets outside ``canonical``
    are dropped silently; for a user table they trigger a warning.
    """
    mapping = default_alias_mapping() if path is None else parse_alias_table(Path(path))
    return SpeciesAliasTable(mapping, canonical, warn=path is not None)


def normalize_species(raw_name, table):
    """Map ``raw_name`` to its canonical virus name.

    Exact canonical names map to themselves; otherwise the alias table is
    consulted.  Unknown names raise :class:`UnmappedSpeciesError`.
    """
    name = raw_name.strip()
    if name in table.canonical:
        return name
    try:
        return table.mapping[name]
    except KeyError:
        raise UnmappedSpeciesError(raw_name) from None


def merge(sequences, metadata, table, viruses=None):
    """Inner-join sequences and metadata on accession.

    Output follows sequence-file order.  Records whose species cannot be
    mapped, or maps to a name outside ``viruses`` (defaults to the alias
    table's canonical set), are dropped and tallied in the report.
    """
    viruses = table.canonical if viruses is None else frozenset(viruses)
    report = MergeReport(n_sequences=len(sequences), n_metadata=len(metadata))
    by_acc = {}
    for m in metadata:
        if m.accession in by_acc:
            report.duplicate_metadata.append(m.accession)
            continue
        by_acc[m.accession] = m
    if report.duplicate_metadata:
        logger.warning(
            "%d duplicated metadata accession(s); first row kept",
            len(report.duplicate_metadata),
        )

    out = []
    used = set()
    for seq in sequences:
        meta = by_acc.get(seq.accession)
        if meta is None:
            report.unmatched_sequences += 1
            continue
        used.add(seq.accession)
        report.matched += 1
        try:
            species = normalize_species(meta.species_raw, table)
        except UnmappedSpeciesError:
            key = meta.species_raw
            report.dropped_unmapped[key] = report.dropped_unmapped.get(key, 0) + 1
            continue
        if species not in viruses:
            d = report.dropped_not_in_drugvirus
            d[species] = d.get(species, 0) + 1
            continue
        out.append(MergedRecord(seq.accession, seq.residues, species, meta.genbank_title))
    report.unmatched_metadata = len(by_acc) - len(used)
    report.kept = len(out)
    return out, report


# ---------------------------------------------------------------------------
# merged record persistence

MERGED_COLUMNS = ("accession", "species", "genbank_title", "residues")


def write_merged(records, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(MERGED_COLUMNS)
        for r in records:
            w.writerow((r.accession, r.species, r.genbank_title, r.residues))


def read_merged(path):
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t")
        header = next(reader)
        if tuple(header) != MERGED_COLUMNS:
            raise MetadataFormatError(f"{path}: unexpected merged-table header {header}")
        return [MergedRecord(a, res, sp, t) for a, sp, t, res in reader]
