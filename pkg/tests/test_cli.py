import json
import shutil

import numpy as np
import pytest

from viralrx import cli
from viralrx.cli import DEFAULT_CONFIG, config_hash, load_config, main
from viralrx.errors import ConfigError
from viralrx.tensor import container

TINY_MODEL = ["--set", "model.max_len=48", "--set", "model.filters_per_bank=3",
              "--set", "train.epochs=1", "--set", "train.batch_size=256"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_config_layering(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"train": {"epochs": 3}, "split": {"ratio": 0.7}}))
    cfg = load_config(path, ["train.epochs=5", "model.kind=\"lstm\"", "split.holdout=[\"A\", \"B\"]"])
    assert cfg["train"]["epochs"] == 5 and cfg["train"]["batch_size"] == 128
    assert cfg["split"]["ratio"] == 0.7 and cfg["split"]["holdout"] == ["A", "B"]
    assert cfg["model"]["kind"] == "lstm"
    assert DEFAULT_CONFIG["train"]["epochs"] == 20
    path.write_text(json.dumps({"bogus": {}}))
    with pytest.raises(ConfigError, match="bogus"):
        load_config(path)
    with pytest.raises(ConfigError):
        load_config(None, ["no-equals-sign"])


def test_config_hash_tracks_only_stage_sections():
    a = load_config()
    b = load_config(None, ["train.epochs=3"])
    assert config_hash(a, "split") == config_hash(b, "split")
    assert config_hash(a, "train") != config_hash(b, "train")


def test_errors_exit_one_with_message(tmp_path, capsys):
    code, _, err = run(capsys, "ingest", "--out", str(tmp_path / "w"))
    assert code == 1 and err.startswith("error: ConfigError: paths.sequences")
    code, _, err = run(capsys, "split", "--out", str(tmp_path / "w"))
    assert code == 1 and "MissingArtifactError" in err
    code, _, err = run(capsys, "build-dataset", "--config", str(tmp_path / "missing.json"))
    assert code == 1 and "not found" in err


def test_inspect(capsys):
    code, out, _ = run(capsys, "inspect", "--model", "cnn", "--paper-exact")
    assert code == 0 and "209,022" in out and "match" in out
    code, out, err = run(capsys, "inspect", "--model", "lstm", "--paper_exact")
    assert code == 1 and "MISMATCH" in out and "1,740,266" in err
    code, out, _ = run(capsys, "inspect", "--model", "lstm", "--set", "model.embed_dim=8", "--out-dim", "5")
    assert code == 0 and "total trainable parameters" in out


def test_grad_check_command(capsys):
    code, out, _ = run(capsys, "grad-check", "--model", "primitives", "--coords", "6")
    assert code == 0
    assert "conv2d_valid" in out and "FAIL" not in out


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--to", str(root / "syn"), "--n-per-species", "15"]) == 0
    cfg = str(root / "syn" / "config.json")
    common = ["--config", cfg, *TINY_MODEL, "--set", "n_runs=2"]
    for stage in ("ingest", "build-dataset", "profile", "split", "train", "evaluate", "predict", "report"):
        assert main([stage, *common]) == 0, stage
    return root, common


def test_pipeline_artifacts(pipeline):
    root, _ = pipeline
    work = root / "syn" / "work"
    for name in ("merged.tsv", "labels.tsv", "dataset.tsv", "profile.tsv", "train.tsv", "eval.tsv",
                 "curves.tsv", "train_summary.json", "evaluation.json", "report/SARS-CoV-2.tsv"):
        assert (work / name).exists(), name
    for stage in ("ingest", "build-dataset", "split", "train", "predict"):
        m = json.loads((work / "manifests" / f"{stage}.json").read_text())
        assert m["stage"] == stage and len(m["config_hash"]) == 64 and m["outputs"]
    summary = json.loads((work / "train_summary.json").read_text())
    assert len(summary["runs"]) == 2 and set(summary["aggregate"]["half_width"]) >= {"f1", "loss"}
    assert sorted(p.name for p in (work / "predictions").iterdir()) == ["run-00.tsv", "run-01.tsv"]
    profile = (work / "profile.tsv").read_text().splitlines()[0].split("\t")
    assert profile == ["species", "merged", "deduplicated", "common", "balanced"]
    jsonl = (work / "runs" / "run-00" / "metrics.jsonl").read_text().splitlines()
    assert [json.loads(line)["side"] for line in jsonl] == ["train", "validation"]


def test_changed_upstream_config_is_refused_unless_forced(pipeline, capsys):
    _, common = pipeline
    code, _, err = run(capsys, "split", *common, "--seed", "9")
    assert code == 1 and "ConfigMismatchError" in err
    code, _, err = run(capsys, "train", *common, "--set", "split.ratio=0.5")
    assert code == 1 and "ConfigMismatchError" in err


def test_dump_activations_command(pipeline, tmp_path, capsys):
    root, common = pipeline
    model = root / "syn" / "work" / "runs" / "run-00" / "model.vrx"
    out = tmp_path / "acts.vrx"
    code, text, _ = run(capsys, "dump-activations", *common, "--model", str(model), "--sequence", "MKVLW" * 12, "--to", str(out))
    assert code == 0 and "logits" in text
    meta, arrays = container.load(out)
    assert meta["layers"][0]["name"] == "input" and arrays["logits"].shape == (1, 16)


def test_rerun_is_byte_identical(pipeline, tmp_path):
    root, common = pipeline
    work = root / "syn" / "work"
    again = tmp_path / "again"
    shutil.copytree(work, again, ignore=shutil.ignore_patterns("runs", "predictions", "report"))
    flags = [*common, "--out", str(again), "--force"]
    assert main(["train", *flags]) == 0
    assert main(["predict", *flags]) == 0
    for rel in ("runs/run-00/model.vrx", "runs/run-01/model.vrx", "predictions/run-00.tsv", "curves.tsv"):
        assert (work / rel).read_bytes() == (again / rel).read_bytes(), rel


def test_predict_on_fasta(pipeline, tmp_path, capsys):
    root, common = pipeline
    fasta = tmp_path / "q.fasta"
    fasta.write_text(">Q1\nMKVLWCHAGGT\n")
    code, _, _ = run(capsys, "predict", *common, "--fasta", str(fasta), "--species", "Query virus")
    assert code == 0
    rows = (root / "syn" / "work" / "predictions" / "run-00.tsv").read_text().splitlines()
    assert rows[1].startswith("Q1\tMKVLWCHAGGT\tQuery virus")
