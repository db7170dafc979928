"""Command-line pipeline: ingest -> build-dataset -> split -> train -> predict -> report.

Every command reads one JSON config (``--config``) merged over built-in
defaults; ``--set section.key=value`` and the dedicated flags override it.
Artifacts go to ``paths.out`` along with a manifest per stage under
``manifests/``.  A stage refuses to run when the config that produced its
upstream artifacts differs from the current one, unless ``--force`` is given.
"""

import argparse
import copy
import datetime
import hashlib
import json
import logging
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .corpus import parse_drugvirus, parse_fasta, parse_metadata, read_merged, write_merged
from .dataset import BalanceConfig, SplitSpec, label_matrix, read_dataset, split, write_dataset
from .errors import ConfigError, ConfigMismatchError, MissingArtifactError, ViralRxError
from .labels import LabelVersion, write_label_dictionary
from .rng import derive_seed

logger = logging.getLogger("viralrx")

DEFAULT_CONFIG = {
    "seed": 0,
    "n_runs": 10,
    "paths": {"sequences": None, "metadata": None, "drugvirus": None, "aliases": None, "out": "viralrx-out"},
    "labels": {"version": "V3"},
    "dataset": {
        "dedup_key": "length",
        "rarity_fraction": 0.005,
        "lower_target": 400,
        "upper_bound": 900,
        "rule": "ceil",
        "ceil_factor": 1.3,
        "nearest_target": 600,
        "replicate_cap": 936,
    },
    "split": {"mode": "random", "ratio": 0.8, "holdout": ["SARS-CoV-2"], "n_random_holdouts": 3},
    "model": {"kind": "cnn"},
    "train": {"epochs": 20, "batch_size": 128, "lr": None, "threshold": 0.5},
    "report": {"threshold": 0.2, "top_k": 20},
}

# config sections each stage depends on, and the stage it reads from
STAGES = {
    "ingest": (("paths.inputs",), None),
    "build-dataset": (("labels", "dataset", "seed"), "ingest"),
    "split": (("split", "seed"), "build-dataset"),
    "train": (("model", "train", "seed", "n_runs"), "split"),
    "predict": (("report",), "train"),
}


# ---------------------------------------------------------------------------
# config


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _set_path(cfg, dotted, value):
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot set {dotted}: {k} is not a section")
    node[keys[-1]] = value


def load_config(path=None, overrides=()):
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        try:
            user = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise MissingArtifactError(f"config file {path} not found") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        unknown = sorted(set(user) - set(DEFAULT_CONFIG))
        if unknown:
            raise ConfigError(f"unknown config section(s): {', '.join(unknown)}")
        cfg = _merge(cfg, user)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        key, value = item.split("=", 1)
        _set_path(cfg, key.strip(), _parse_value(value))
    return cfg


def _section(cfg, name):
    if name == "paths.inputs":
        return {k: v for k, v in cfg["paths"].items() if k != "out"}
    return cfg[name]


def config_hash(cfg, stage):
    sections, _ = STAGES[stage]
    payload = {name: _section(cfg, name) for name in sections}
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode("utf-8")).hexdigest()


def balance_config(cfg):
    d = cfg["dataset"]
    return BalanceConfig(
        lower_target=d["lower_target"], upper_bound=d["upper_bound"], rarity_fraction=d["rarity_fraction"],
        seed=cfg["seed"], rule=d["rule"], ceil_factor=d["ceil_factor"], nearest_target=d["nearest_target"],
        replicate_cap=d["replicate_cap"],
    )


def split_spec(cfg):
    s = cfg["split"]
    return SplitSpec(mode=s["mode"], ratio=s["ratio"], holdout=tuple(s["holdout"]),
                     n_random_holdouts=s["n_random_holdouts"], seed=cfg["seed"])


def run_seeds(cfg):
    n = int(cfg["n_runs"])
    if n < 1:
        raise ConfigError("n_runs must be >= 1")
    return [derive_seed(cfg["seed"], f"run/{i}") for i in range(n)]


def estimator_params(cfg, seed):
    from .train import DEFAULT_LR

    model = dict(cfg["model"])
    kind = model.pop("kind")
    if kind not in DEFAULT_LR:
        raise ConfigError(f"unknown model kind {kind!r}")
    t = cfg["train"]
    lr = t["lr"] if t["lr"] is not None else DEFAULT_LR[kind]
    params = dict(model, lr=lr, epochs=t["epochs"], batch_size=t["batch_size"], threshold=t["threshold"], seed=seed)
    return kind, params


# ---------------------------------------------------------------------------
# manifests


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _versions():
    import sklearn

    return {"viralrx": __version__, "numpy": np.__version__, "scikit-learn": sklearn.__version__,
            "python": platform.python_version()}


class Workspace:
    def __init__(self, cfg, force=False):
        self.cfg = cfg
        self.root = Path(cfg["paths"]["out"])
        self.force = force

    def path(self, *parts):
        return self.root.joinpath(*parts)

    def require(self, *parts):
        p = self.path(*parts)
        if not p.exists():
            raise MissingArtifactError(f"missing upstream artifact {p}")
        return p

    def manifest_path(self, stage):
        return self.path("manifests", f"{stage}.json")

    def check_upstream(self, stage):
        """Compare the upstream stage's recorded config hash with the current config."""
        upstream = STAGES[stage][1]
        if upstream is None:
            return None
        mpath = self.manifest_path(upstream)
        if not mpath.exists():
            raise MissingArtifactError(f"no manifest for upstream stage {upstream!r} at {mpath}")
        recorded = json.loads(mpath.read_text(encoding="utf-8"))["config_hash"]
        current = config_hash(self.cfg, upstream)
        if recorded != current:
            if not self.force:
                raise ConfigMismatchError(
                    f"config for {upstream!r} changed since it ran (recorded {recorded[:12]}, "
                    f"current {current[:12]}); rerun it or pass --force"
                )
            logger.warning("config for %s changed since it ran; continuing because of --force", upstream)
        return {upstream: recorded}

    def write_manifest(self, stage, inputs, outputs, upstream=None, extra=None):
        sections, _ = STAGES.get(stage, ((), None))
        manifest = {
            "stage": stage,
            "config": {name: _section(self.cfg, name) for name in sections},
            "config_hash": config_hash(self.cfg, stage) if stage in STAGES else None,
            "upstream": upstream or {},
            "seed": self.cfg["seed"],
            "inputs": {str(p): sha256_file(p) for p in inputs},
            "outputs": {str(p): sha256_file(p) for p in outputs},
            "versions": _versions(),
            "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
        }
        manifest.update(extra or {})
        mpath = self.manifest_path(stage)
        mpath.parent.mkdir(parents=True, exist_ok=True)
        _write_json(mpath, manifest)
        return mpath


def _write_json(path, obj):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# commands


def cmd_ingest(ws, args):
    from .pipeline import ingest

    paths = ws.cfg["paths"]
    inputs = []
    for key in ("sequences", "metadata", "drugvirus"):
        if not paths.get(key):
            raise ConfigError(f"paths.{key} is not set")
        p = Path(paths[key])
        if not p.exists():
            raise MissingArtifactError(f"input {key} not found: {p}")
        inputs.append(p)
    if paths.get("aliases"):
        inputs.append(Path(paths["aliases"]))
    delim = "\t" if inputs[1].suffix in (".tsv", ".tab") else ","
    sequences = parse_fasta(inputs[0])
    metadata = parse_metadata(inputs[1], delimiter=delim)
    delim = "\t" if inputs[2].suffix in (".tsv", ".tab") else ","
    entries = parse_drugvirus(inputs[2], delimiter=delim)
    records, report = ingest(sequences, metadata, entries, paths.get("aliases"))
    ws.root.mkdir(parents=True, exist_ok=True)
    merged = ws.path("merged.tsv")
    write_merged(records, merged)
    dv = ws.path("drugvirus.tsv")
    _write_drugvirus(entries, dv)
    rep = ws.path("ingest_report.json")
    _write_json(rep, report.as_dict())
    ws.write_manifest("ingest", inputs, [merged, dv, rep])
    print(f"merged {report.kept} of {report.n_sequences} sequences -> {merged}")


def _write_drugvirus(entries, path):
    lines = ["Drug\tVirus\tPhase"]
    for e in sorted(entries, key=lambda e: (e.virus, e.drug)):
        lines += [f"{e.drug}\t{e.virus}\t{p.name}" for p in sorted(e.phases)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_build_dataset(ws, args):
    from .pipeline import build_dataset

    upstream = ws.check_upstream("build-dataset")
    merged, dv = ws.require("merged.tsv"), ws.require("drugvirus.tsv")
    records = read_merged(merged)
    entries = parse_drugvirus(dv, delimiter="\t")
    version = LabelVersion.coerce(ws.cfg["labels"]["version"])
    build = build_dataset(records, entries, version, ws.cfg["dataset"]["dedup_key"], balance_config(ws.cfg))
    labels, data, summary = ws.path("labels.tsv"), ws.path("dataset.tsv"), ws.path("build_report.json")
    write_label_dictionary(build.dictionary, labels)
    write_dataset(build.examples, data, build.dictionary.column_names())
    _write_json(summary, dict(build.summary(), stages=build.stages, stage_order=list(build.stages)))
    ws.write_manifest("build-dataset", [merged, dv], [labels, data, summary], upstream)
    print(f"{len(build.examples)} examples over {len(build.stages['balanced'])} species -> {data}")


def cmd_profile(ws, args):
    from .dataset import profile_table

    report = _read_json(ws.require("build_report.json"))
    stages = {name: report["stages"][name] for name in report["stage_order"]}
    names, rows = profile_table(stages)
    out = ws.path("profile.tsv")
    lines = ["\t".join(["species", *names])] + ["\t".join(map(str, r)) for r in rows]
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    width = max(len(r[0]) for r in rows)
    print(f"{'species':<{width}}  " + "  ".join(f"{n:>12}" for n in names))
    for r in rows:
        print(f"{r[0]:<{width}}  " + "  ".join(f"{c:>12}" for c in r[1:]))
    d = report["dedup"]
    print(f"dedup ({d['key']}): {d['total_before']} -> {d['total_after']} ({100 * d['reduction']:.1f}% removed)")
    if report["excluded_rare"]:
        print("excluded as rare: " + ", ".join(report["excluded_rare"]))


def cmd_split(ws, args):
    upstream = ws.check_upstream("split")
    data = ws.require("dataset.tsv")
    examples, columns = read_dataset(data)
    train, ev, report = split(examples, split_spec(ws.cfg))
    tr, evp, rep = ws.path("train.tsv"), ws.path("eval.tsv"), ws.path("split.json")
    write_dataset(train, tr, columns)
    write_dataset(ev, evp, columns)
    _write_json(rep, report.as_dict())
    ws.write_manifest("split", [data], [tr, evp, rep], upstream, extra={"eval_species": sorted(report.eval)})
    print(f"train {len(train)}  eval {len(ev)}  eval species: {', '.join(sorted(report.eval))}")


def _xy(path):
    examples, columns = read_dataset(path)
    return examples, [e.residues for e in examples], label_matrix(examples), columns


def _run_dirs(ws):
    runs = sorted(p for p in ws.path("runs").glob("run-*") if (p / "model.vrx").exists()) if ws.path("runs").exists() else []
    if not runs:
        raise MissingArtifactError(f"no trained runs under {ws.path('runs')}")
    return runs


def cmd_train(ws, args):
    from .models import make_classifier
    from .train import MetricsLog, aggregate_runs, write_curves

    upstream = ws.check_upstream("train")
    trp, evp = ws.require("train.tsv"), ws.require("eval.tsv")
    _, X, Y, columns = _xy(trp)
    _, Xe, Ye, _ = _xy(evp)
    labels_path = ws.path("labels.tsv")
    histories, finals, outputs = {}, [], []
    for i, seed in enumerate(run_seeds(ws.cfg)):
        run_dir = ws.path("runs", f"run-{i:02d}")
        run_dir.mkdir(parents=True, exist_ok=True)
        log_path = run_dir / "metrics.jsonl"
        log_path.unlink(missing_ok=True)
        kind, params = estimator_params(ws.cfg, seed)
        est = make_classifier(kind, **params)
        est.fit(X, Y, eval_set=(Xe, Ye), log=MetricsLog(log_path, run_id=i))
        model = run_dir / "model.vrx"
        est.save(model, meta={"label_columns": columns, "run": i, "run_seed": seed})
        histories[i] = est.history_
        final = [s for s in est.history_ if s.side == "validation"][-1]
        finals.append(final)
        outputs += [model, log_path]
        print(f"run {i}: validation f1={final.f1:.4f} precision={final.precision:.4f} "
              f"recall={final.recall:.4f} loss={final.loss:.4f}")
    curves = ws.path("curves.tsv")
    write_curves(histories, curves)
    summary = {"runs": [s.as_dict() for s in finals]}
    if len(finals) >= 2:
        agg = aggregate_runs(finals)
        summary["aggregate"] = agg.as_dict()
        print("mean over runs: " + agg.format())
    summ = ws.path("train_summary.json")
    _write_json(summ, summary)
    inputs = [trp, evp] + ([labels_path] if labels_path.exists() else [])
    ws.write_manifest("train", inputs, outputs + [curves, summ], upstream)


def cmd_evaluate(ws, args):
    from .models import load_model
    from .train import aggregate_runs

    ws.check_upstream("predict")
    data = Path(args.data) if args.data else ws.require("eval.tsv")
    _, X, Y, _ = _xy(data)
    snaps = []
    for run_dir in _run_dirs(ws):
        est, _ = load_model(run_dir / "model.vrx")
        snap = est.evaluate(X, Y, threshold=ws.cfg["train"]["threshold"])
        snaps.append(snap)
        print(f"{run_dir.name}: accuracy={snap.accuracy:.4f} precision={snap.precision:.4f} "
              f"recall={snap.recall:.4f} f1={snap.f1:.4f} loss={snap.loss:.4f}")
    out = {"data": str(data), "runs": [s.as_dict() for s in snaps]}
    if len(snaps) >= 2:
        agg = aggregate_runs(snaps)
        out["aggregate"] = agg.as_dict()
        print("mean over runs: " + agg.format())
    _write_json(ws.path("evaluation.json"), out)


def cmd_predict(ws, args):
    from .models import load_model
    from .report import postprocess, write_predictions

    upstream = ws.check_upstream("predict")
    if args.fasta:
        data = Path(args.fasta)
        seqs = parse_fasta(data)
        meta = [(s.accession, args.species or "", "", s.residues) for s in seqs]
        X = [s.residues for s in seqs]
    else:
        data = Path(args.data) if args.data else ws.require("eval.tsv")
        examples, X, _, _ = _xy(data)
        meta = [(e.accession, e.species, e.genbank_title, e.residues) for e in examples]
    threshold = ws.cfg["report"]["threshold"]
    outputs = []
    for run_dir in _run_dirs(ws):
        est, header = load_model(run_dir / "model.vrx")
        rows = postprocess(est.predict_proba(X), header["label_columns"], threshold, meta)
        out = ws.path("predictions", f"{run_dir.name}.tsv")
        out.parent.mkdir(parents=True, exist_ok=True)
        write_predictions(rows, out)
        outputs.append(out)
        print(f"{run_dir.name}: {sum(len(r.drugs) for r in rows)} selections over {len(rows)} sequences -> {out}")
    ws.write_manifest("predict", [data], outputs, upstream)


def cmd_report(ws, args):
    from .report import format_summary, read_predictions, summarize, write_summary

    pred_dir = ws.require("predictions")
    files = sorted(pred_dir.glob("run-*.tsv"))
    if not files:
        raise MissingArtifactError(f"no prediction files under {pred_dir}")
    rows = [r for f in files for r in read_predictions(f)]
    by_species = {}
    for r in rows:
        by_species.setdefault(r.species, []).append(r)
    wanted = args.species or sorted(by_species)
    top_k = args.top_k if args.top_k is not None else ws.cfg["report"]["top_k"]
    outputs = []
    for species in wanted:
        if species not in by_species:
            raise ConfigError(f"no predictions for species {species!r}")
        sp_rows = by_species[species]
        n_seq = len({r.accession for r in sp_rows})
        summaries = [s for s in summarize(sp_rows)]
        out = ws.path("report", _slug(species) + ".tsv")
        out.parent.mkdir(parents=True, exist_ok=True)
        write_summary(summaries, out)
        outputs.append(out)
        title = f"{species}: {n_seq} sequences, {len(files)} run(s)"
        print(format_summary(summaries[:top_k], title) if summaries else f"{title}\n(no drug selected)")
        print()
    ws.write_manifest("report", files, outputs, {"predict": _read_json(ws.require("manifests", "predict.json"))["config_hash"]})


def _slug(name):
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


def cmd_grad_check(ws, args):
    from .tensor.suite import run_suite

    reports = run_suite(args.model, seed=ws.cfg["seed"], n_coords=args.coords)
    for r in reports:
        print(r.line())
    worst = max(r.max_rel_err for r in reports)
    failed = [r.name for r in reports if not r.passed]
    print(f"{len(reports) - len(failed)}/{len(reports)} passed, max rel err {worst:.3e} (tolerance {reports[0].tolerance:g})")
    return 1 if failed else 0


def cmd_inspect(ws, args):
    from .models.networks import REFERENCE_CNN_PARAMS, REFERENCE_LSTM_PARAMS, CnnConfig, LstmConfig, build_cnn, build_lstm
    from .models.networks import format_layer_table

    model = {k: v for k, v in ws.cfg["model"].items() if k != "kind"}
    if args.exact:
        model = {}
    if args.out_dim is not None:
        model["out_dim"] = args.out_dim
    try:
        if args.model == "cnn":
            net = build_cnn(CnnConfig(**model), exact=args.exact)
        else:
            net = build_lstm(LstmConfig(**model))
    except TypeError as exc:
        raise ConfigError(f"bad model config: {exc}") from None
    print(format_layer_table(net))
    if args.exact:
        expected = REFERENCE_CNN_PARAMS if args.model == "cnn" else REFERENCE_LSTM_PARAMS
        print(f"reference count {expected:,}: {'match' if net.n_parameters() == expected else 'MISMATCH'}")
        if net.n_parameters() != expected:
            raise ConfigError(f"{args.model} has {net.n_parameters():,} parameters, reference {expected:,}")


def cmd_dump_activations(ws, args):
    from .models import load_model
    from .models.encoding import tokenize_pad
    from .report import dump_activations

    est, _ = load_model(args.model)
    residues = args.sequence
    if residues is None:
        data = Path(args.data) if args.data else ws.require("eval.tsv")
        examples, _ = read_dataset(data)
        match = [e for e in examples if e.accession == args.accession]
        if not match:
            raise ConfigError(f"accession {args.accession!r} not in {data}")
        residues = match[0].residues
    from .validation import check_sequences

    ids = tokenize_pad(check_sequences([residues])[0], est.max_len)
    encoded = est.network_.encode(ids[None])[0]
    arrays = dump_activations(est.network_, encoded, args.out)
    for name, a in arrays.items():
        print(f"{name:<24} {tuple(a.shape)}")
    print(f"-> {args.out}")


def cmd_synth(ws, args):
    from .synthetic import SyntheticSpec, write_corpus

    out = Path(args.out)
    paths = write_corpus(out, SyntheticSpec(n_per_species=args.n_per_species, seed=args.seed))
    cfg = {
        "paths": {k: str(v) for k, v in paths.items()} | {"out": str(out / "work")},
        "dataset": {"dedup_key": "content"},
        "split": {"mode": "random", "ratio": 0.8, "holdout": ["SARS-CoV-2"], "n_random_holdouts": 0},
        "n_runs": 1,
    }
    _write_json(out / "config.json", cfg)
    print(f"synthetic corpus -> {out} (config: {out / 'config.json'})")


COMMANDS = {
    "ingest": cmd_ingest,
    "build-dataset": cmd_build_dataset,
    "profile": cmd_profile,
    "split": cmd_split,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "predict": cmd_predict,
    "report": cmd_report,
    "grad-check": cmd_grad_check,
    "inspect": cmd_inspect,
    "dump-activations": cmd_dump_activations,
    "synth": cmd_synth,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override a config value (JSON-parsed); repeatable")
    common.add_argument("--out", dest="out_dir", help="artifact directory (paths.out)")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--force", action="store_true", help="ignore upstream config-hash mismatches")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="viralrx", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"viralrx {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", parents=[common], help="parse and merge the raw inputs")
    s.add_argument("--sequences")
    s.add_argument("--metadata")
    s.add_argument("--drugvirus")
    s.add_argument("--aliases")

    s = sub.add_parser("build-dataset", parents=[common], help="labels, dedup, rarity filter, balancing")
    s.add_argument("--label-version", choices=[v.value for v in LabelVersion])
    s.add_argument("--dedup-key", choices=["length", "content"])

    sub.add_parser("profile", parents=[common], help="per-species counts at each data stage")

    s = sub.add_parser("split", parents=[common], help="train/eval split")
    s.add_argument("--mode", choices=["random", "by-species"])
    s.add_argument("--ratio", type=float)
    s.add_argument("--holdout", action="append", help="holdout species (repeatable)")
    s.add_argument("--n-random-holdouts", type=int)

    s = sub.add_parser("train", parents=[common], help="train one or more seeded runs")
    s.add_argument("--model", choices=["cnn", "lstm"])
    s.add_argument("--epochs", type=int)
    s.add_argument("--batch-size", type=int)
    s.add_argument("--lr", type=float)
    s.add_argument("--runs", type=int, help="n_runs")

    s = sub.add_parser("evaluate", parents=[common], help="metrics of every trained run")
    s.add_argument("--data", help="dataset TSV (default: eval split)")

    s = sub.add_parser("predict", parents=[common], help="thresholded drug lists per sequence")
    s.add_argument("--data", help="dataset TSV (default: eval split)")
    s.add_argument("--fasta", help="predict on raw FASTA instead")
    s.add_argument("--species", help="species name for --fasta input")
    s.add_argument("--threshold", type=float)

    s = sub.add_parser("report", parents=[common], help="Count/Mean Probability tables per species")
    s.add_argument("--species", action="append")
    s.add_argument("--top-k", type=int)

    s = sub.add_parser("grad-check", parents=[common], help="finite-difference gradient checks")
    s.add_argument("--model", choices=["all", "primitives", "cnn", "lstm"], default="all")
    s.add_argument("--coords", type=int, default=24, help="coordinates probed per tensor")

    s = sub.add_parser("inspect", parents=[common], help="layer table and parameter count")
    s.add_argument("--model", choices=["cnn", "lstm"], default="cnn")
    s.add_argument("--paper-exact", "--paper_exact", dest="exact", action="store_true",
                   help="reference configuration; fail unless the count matches the reference")
    s.add_argument("--out-dim", type=int)

    s = sub.add_parser("dump-activations", parents=[common], help="write every layer's activation for one sequence")
    s.add_argument("--model", required=True, help="model checkpoint")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--sequence")
    g.add_argument("--accession")
    s.add_argument("--data")
    s.add_argument("--to", dest="out", required=True, help="output container path")

    s = sub.add_parser("synth", parents=[common], help="write a synthetic corpus and matching config")
    s.add_argument("--to", dest="out", required=True)
    s.add_argument("--n-per-species", type=int, default=400)
    return p


def _apply_flags(cfg, args):
    flag_map = {
        "out_dir": "paths.out", "seed": "seed", "sequences": "paths.sequences", "metadata": "paths.metadata",
        "drugvirus": "paths.drugvirus", "aliases": "paths.aliases", "label_version": "labels.version",
        "dedup_key": "dataset.dedup_key", "mode": "split.mode", "ratio": "split.ratio", "holdout": "split.holdout",
        "n_random_holdouts": "split.n_random_holdouts", "epochs": "train.epochs", "batch_size": "train.batch_size",
        "lr": "train.lr", "runs": "n_runs", "threshold": "report.threshold",
    }
    if args.command == "train" and getattr(args, "model", None):
        flag_map["model"] = "model.kind"
    for attr, key in flag_map.items():
        value = getattr(args, attr, None)
        if value is not None:
            _set_path(cfg, key, value)
    if args.command == "synth" and args.seed is None:
        args.seed = cfg["seed"]
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _apply_flags(load_config(args.config, args.set), args)
        code = COMMANDS[args.command](Workspace(cfg, force=args.force), args)
    except (ViralRxError, ValueError, KeyError, OSError) as exc:
        msg = str(exc).strip().splitlines()[0] if str(exc).strip() else ""
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    return code or 0


if __name__ == "__main__":
    sys.exit(main())
