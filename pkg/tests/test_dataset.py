import csv
from collections import Counter
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from viralrx.dataset import (
    BalanceConfig,
    SplitSpec,
    balance,
    compute_class_weights,
    deduplicate,
    exclude_rare,
    read_dataset,
    replication_factor,
    species_counts,
    split,
    write_dataset,
)
from viralrx.errors import ConfigError, SplitError
from viralrx.labels import LabeledExample

DATA = Path(__file__).parent / "data"
ONE = np.ones(1, dtype=np.uint8)


def ex(acc, residues, species, labels=ONE):
    return LabeledExample(acc, residues, species, labels)


def load_counts(name):
    with open(DATA / name, encoding="utf-8") as fh:
        return {r["species"]: int(r["count"]) for r in csv.DictReader(fh, delimiter="\t")}


def pool_from_counts(counts):
    return [ex(f"{s}/{i}", "M" * (i + 1), s) for s, c in counts.items() for i in range(c)]


# dedup


def test_dedup_same_length_keeps_first():
    a = ex("a", "M" * 312, "HSV-1")
    b = ex("b", "K" * 312, "HSV-1")
    c = ex("c", "K" * 313, "HSV-1")
    out, rep = deduplicate([a, b, c])
    assert out == [a, c]
    assert rep.before == {"HSV-1": 3} and rep.after == {"HSV-1": 2}


def test_dedup_content_key():
    a, b, c = ex("a", "MK", "S"), ex("b", "GG", "S"), ex("c", "MK", "S")
    out, _ = deduplicate([a, b, c], key="content")
    assert out == [a, b]
    with pytest.raises(ConfigError):
        deduplicate([a], key="fuzzy")


examples_strategy = st.lists(
    st.tuples(st.sampled_from("ABCD"), st.text(alphabet="MKGP", min_size=1, max_size=6)),
    max_size=40,
).map(lambda rows: [ex(f"x{i}", r, s) for i, (s, r) in enumerate(rows)])


@settings(max_examples=80, deadline=None)
@given(examples_strategy, st.sampled_from(["length", "content"]))
def test_dedup_idempotent_and_keys_unique(examples, key):
    once, _ = deduplicate(examples, key)
    twice, _ = deduplicate(once, key)
    assert twice == once
    keyf = (lambda e: (e.species, len(e.residues))) if key == "length" else (lambda e: (e.species, e.residues))
    keys = [keyf(e) for e in once]
    assert len(keys) == len(set(keys))
    assert {keyf(e) for e in examples} == set(keys)


# rarity


def test_rarity_boundary_on_profile_counts():
    counts = load_counts("counts_dedup.tsv")
    assert sum(counts.values()) == 14_370
    kept_expected = set(load_counts("counts_balanced.tsv"))
    assert len(kept_expected) == 47
    pool = pool_from_counts(counts)
    out, excluded = exclude_rare(pool, 0.005)
    kept = set(species_counts(out))
    assert kept == kept_expected
    assert counts["Hepatitis D virus"] == 65 and "Hepatitis D virus" in excluded
    assert counts["Rubella virus"] == 73 and "Rubella virus" in kept
    assert "Andes virus" in excluded


def test_rarity_single_species_keeps_everything():
    pool = [ex(str(i), "MK", "Only") for i in range(3)]
    assert exclude_rare(pool)[0] == pool


@settings(max_examples=60, deadline=None)
@given(examples_strategy, st.floats(0.01, 0.5))
def test_rarity_idempotent(examples, fraction):
    once, _ = exclude_rare(examples, fraction)
    twice, _ = exclude_rare(once, fraction)
    assert twice == once


# balance


def test_balance_keeps_profile_species_in_range():
    counts = {s: c for s, c in load_counts("counts_dedup.tsv").items() if s in load_counts("counts_balanced.tsv")}
    out, rep = balance(pool_from_counts(counts), BalanceConfig())
    final = species_counts(out)
    assert all(400 <= c <= 936 for c in final.values())
    assert final["Respiratory syncytial virus"] == 474
    assert rep.species["Respiratory syncytial virus"]["mode"] == "keep"
    for s, info in rep.species.items():
        assert info["final"] == final[s]
        if info["mode"] == "replicate":
            assert info["final"] == info["factor"] * counts[s]


def test_replication_factor_rules():
    ceil = BalanceConfig()
    nearest = BalanceConfig(rule="nearest")
    # nearest-to-600 reproduces the 75 -> 600 profile row; the default rule gives 525
    assert replication_factor(75, nearest) == 8
    assert replication_factor(75, ceil) == 7
    assert replication_factor(132, nearest) == 5
    assert replication_factor(474, ceil) == replication_factor(474, nearest) == 1
    assert replication_factor(468, ceil) == 1
    assert replication_factor(104, ceil) * 104 == 520
    assert replication_factor(1000, ceil) == 1


def test_balance_undersamples_reproducibly():
    pool = [ex(f"a{i}", "M", "Big") for i in range(1000)] + [ex(f"b{i}", "K", "Small") for i in range(500)]
    out1, rep = balance(pool, BalanceConfig(seed=3))
    out2, _ = balance(pool, BalanceConfig(seed=3))
    assert [e.accession for e in out1] == [e.accession for e in out2]
    assert species_counts(out1) == {"Big": 900, "Small": 500}
    assert rep.species["Big"]["mode"] == "undersample"
    big = [int(e.accession[1:]) for e in out1 if e.species == "Big"]
    assert big == sorted(big) and len(set(big)) == 900


@settings(max_examples=40, deadline=None)
@given(
    st.dictionaries(st.sampled_from("ABCDEFG"), st.one_of(st.integers(1, 1200), st.integers(895, 940)), min_size=1, max_size=5),
    st.integers(0, 5),
)
def test_balance_range_and_multiplicity(counts, seed):
    pool = pool_from_counts(counts)
    out, rep = balance(pool, BalanceConfig(seed=seed))
    final = species_counts(out)
    for s, c in counts.items():
        if c > 900:
            assert final[s] == 900
        elif c >= 400:
            assert final[s] == c
        else:
            k = rep.species[s]["factor"]
            assert final[s] == k * c
            # every original example appears exactly k times
            mult = Counter(e.accession for e in out if e.species == s)
            assert set(mult.values()) == {k}
        assert 400 <= final[s] <= 936
    assert {e.accession for e in out} <= {e.accession for e in pool}


# class weights


def test_class_weight_examples():
    n = 100
    y = np.zeros((n, 3), dtype=np.uint8)
    y[:50, 0] = 1
    y[:10, 1] = 1
    w = compute_class_weights(y)
    assert w.positive[0] == pytest.approx(1.0) and w.negative[0] == pytest.approx(1.0)
    assert w.positive[1] == pytest.approx(5.0) and w.negative[1] == pytest.approx(100 / 180)
    assert w.positive[2] == 20.0 and w.negative[2] == pytest.approx(0.5)


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 200).flatmap(lambda n: st.tuples(st.just(n), st.lists(st.integers(0, n), min_size=1, max_size=6))))
def test_class_weight_mass_balance(args):
    n, positives = args
    y = np.zeros((n, len(positives)), dtype=np.uint8)
    for j, p in enumerate(positives):
        y[:p, j] = 1
    w = compute_class_weights(y)
    assert np.all(w.positive > 0) and np.all(np.isfinite(w.negative))
    for j, p in enumerate(positives):
        unclamped = 0 < p < n and 0.05 <= n / (2 * p) <= 20 and 0.05 <= n / (2 * (n - p)) <= 20
        if unclamped:
            assert p * w.positive[j] == pytest.approx((n - p) * w.negative[j], rel=1e-12)


# split


def test_random_split_counts():
    pool = [ex(str(i), "MK", "S") for i in range(10)]
    tr, ev, rep = split(pool, SplitSpec(ratio=0.8, seed=1))
    assert len(tr) == 8 and len(ev) == 2
    assert {id(e) for e in tr}.isdisjoint({id(e) for e in ev})
    assert sorted(e.accession for e in tr + ev) == sorted(e.accession for e in pool)


def test_by_species_named_holdouts():
    names = ["SARS-CoV-2", "Herpes simplex virus 1", "Human Astrovirus", "Ebola virus", "Zika virus", "Dengue virus"]
    pool = [ex(f"{s}{i}", "MK", s) for s in names for i in range(3)]
    spec = SplitSpec(mode="by-species", holdout=tuple(names[:4]), n_random_holdouts=0)
    tr, ev, rep = split(pool, spec)
    assert set(rep.eval) == set(names[:4])
    assert set(rep.train) == {"Zika virus", "Dengue virus"}
    tr, ev, rep = split(pool, SplitSpec(mode="by-species", n_random_holdouts=0))
    assert set(rep.eval) == {"SARS-CoV-2"}


def test_split_errors():
    pool = [ex("a", "MK", "Zika virus")]
    with pytest.raises(SplitError):
        split(pool, SplitSpec(mode="by-species", n_random_holdouts=0))
    with pytest.raises(ConfigError):
        SplitSpec(mode="by-species", holdout=("Zika virus",))
    with pytest.raises(ConfigError):
        SplitSpec(ratio=1.0)
    with pytest.raises(SplitError):
        split(pool, SplitSpec(ratio=0.5))


@settings(max_examples=60, deadline=None)
@given(
    st.dictionaries(st.sampled_from(["B", "C", "D", "E", "F"]), st.integers(1, 6), min_size=3, max_size=5),
    st.integers(0, 2),
    st.integers(0, 100),
)
def test_by_species_split_properties(counts, n_random, seed):
    counts = dict(counts, **{"SARS-CoV-2": 2})
    pool = pool_from_counts(counts)
    tr, ev, rep = split(pool, SplitSpec(mode="by-species", n_random_holdouts=n_random, seed=seed))
    assert set(rep.train).isdisjoint(rep.eval)
    assert "SARS-CoV-2" in rep.eval
    assert len(rep.eval) == 1 + n_random
    assert len(tr) + len(ev) == len(pool)
    again = split(pool, SplitSpec(mode="by-species", n_random_holdouts=n_random, seed=seed))
    assert again[2].eval == rep.eval


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 60), st.floats(0.05, 0.95), st.integers(0, 50))
def test_random_split_properties(n, ratio, seed):
    pool = [ex(str(i), "MK", "S") for i in range(n)]
    try:
        tr, ev, _ = split(pool, SplitSpec(ratio=ratio, seed=seed))
    except SplitError:
        assert round(ratio * n) in (0, n)
        return
    assert len(tr) == round(ratio * n)
    assert {e.accession for e in tr}.isdisjoint({e.accession for e in ev})
    assert {e.accession for e in tr} | {e.accession for e in ev} == {e.accession for e in pool}


def test_dataset_round_trip(tmp_path):
    lab = np.array([1, 0, 1], dtype=np.uint8)
    pool = [LabeledExample("A1", "MKF", "Zika virus", lab, "polyprotein"), LabeledExample("A2", "GG", "Zika virus", lab)]
    write_dataset(pool, tmp_path / "d.tsv", ["x", "y", "z"])
    back, cols = read_dataset(tmp_path / "d.tsv")
    assert cols == ["x", "y", "z"]
    assert [(e.accession, e.residues, e.species, e.genbank_title) for e in back] == [
        (e.accession, e.residues, e.species, e.genbank_title) for e in pool
    ]
    assert back[0].labels is back[1].labels
    assert back[0].labels.tolist() == [1, 0, 1]
