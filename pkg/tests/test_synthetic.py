from collections import Counter

from viralrx.corpus import parse_drugvirus, parse_fasta, parse_metadata
from viralrx.labels import LabelVersion
from viralrx.pipeline import build_dataset, ingest
from viralrx.synthetic import DRUGS, PINNED, SIBLING, SPECIES, TWIN, SyntheticSpec, generate, species_motifs, write_corpus


def test_twin_shares_motifs_and_drugs_with_sibling():
    motifs = species_motifs(0)
    assert motifs[TWIN] == motifs[SIBLING]
    others = [m for s, ms in motifs.items() if s not in (TWIN, SIBLING) for m in ms]
    assert len(others) == len(set(others))
    assert not set(motifs[SIBLING]) & set(others)


def test_generation_is_seeded():
    a = generate(SyntheticSpec(n_per_species=5, seed=1))[0]
    b = generate(SyntheticSpec(n_per_species=5, seed=1))[0]
    c = generate(SyntheticSpec(n_per_species=5, seed=2))[0]
    assert a == b and a != c


def test_every_sequence_carries_its_species_motif():
    seqs, meta, _, motifs = generate(SyntheticSpec(n_per_species=10))
    species = {m.accession: m.species_raw for m in meta}
    for s in seqs:
        assert any(m in s.residues for m in motifs[species[s.accession]])
        assert 120 <= len(s.residues) <= 500


def test_written_corpus_flows_through_ingest_and_build(tmp_path):
    paths = write_corpus(tmp_path, SyntheticSpec(n_per_species=12))
    seqs = parse_fasta(paths["sequences"].read_text())
    meta = parse_metadata(paths["metadata"].read_text())
    entries = parse_drugvirus(paths["drugvirus"].read_text())
    records, report = ingest(seqs, meta, entries)
    assert len(records) == 12 * len(SPECIES)
    build = build_dataset(records, entries, LabelVersion.V3, dedup_key="content")
    names = build.dictionary.registry.names
    assert set(names) == set(DRUGS) and len(names) == 16
    counts = Counter(e.species for e in build.examples)
    assert set(counts) == set(SPECIES)
    assert all(400 <= c <= 936 for c in counts.values())
    col = build.dictionary.registry.index
    pinned = build.dictionary[PINNED]
    # cell-culture-only pairs are negatives under the default labels
    assert pinned[col["Orlistavir"]] == 1 and pinned[col["Pexavudine"]] == 1 and pinned[col["Aclavudine"]] == 0
    assert (build.dictionary[TWIN] == build.dictionary[SIBLING]).all()
    assert list(build.stages) == ["merged", "deduplicated", "common", "balanced"]
