"""Glue between the data stages: merge, labels, dedup, rarity, balance."""

from dataclasses import dataclass, field

from .corpus import load_alias_table, merge
from .dataset import BalanceConfig, balance, deduplicate, exclude_rare, species_counts
from .labels import LabelVersion, attach_labels, build_label_dictionary


def ingest(sequences, metadata, entries, alias_path=None):
    """Join sequences with metadata, keeping species present in the DrugVirus table.

    Returns ``(records, merge_report)``.
    """
    viruses = sorted({e.virus for e in entries})
    table = load_alias_table(alias_path, canonical=viruses)
    return merge(sequences, metadata, table, viruses)


@dataclass
class DatasetBuild:
    examples: list
    dictionary: object
    coverage: dict
    dedup: object
    excluded: list
    balance: object
    stages: dict = field(default_factory=dict)

    def summary(self):
        return {
            "label_version": self.dictionary.version.value,
            "n_drugs": len(self.dictionary.registry),
            "registry_digest": self.dictionary.registry.digest(),
            "coverage": self.coverage,
            "dedup": self.dedup.as_dict(),
            "excluded_rare": self.excluded,
            "balance": self.balance.as_dict(),
        }


def build_dataset(records, entries, label_version=LabelVersion.V3, dedup_key="length",
                  balance_config=BalanceConfig()):
    """Label merged records, then deduplicate, drop rare species and balance.

    ``stages`` in the result holds per-species counts after each step, the
    input to the profile table.
    """
    dictionary = build_label_dictionary(entries, label_version)
    examples, coverage = attach_labels(records, dictionary)
    stages = {"merged": species_counts(examples)}
    examples, dedup = deduplicate(examples, dedup_key)
    stages["deduplicated"] = species_counts(examples)
    examples, excluded = exclude_rare(examples, balance_config.rarity_fraction)
    stages["common"] = species_counts(examples)
    examples, bal = balance(examples, balance_config)
    stages["balanced"] = species_counts(examples)
    return DatasetBuild(examples, dictionary, coverage, dedup, excluded, bal, stages)
