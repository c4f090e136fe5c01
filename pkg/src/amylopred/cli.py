"""Command-line surface: train, crossval, predict, eval-peptides,
eval-regions, fetch-embeddings.

Configuration is a flat JSON document; every flag overrides its config
key, and the effective config is echoed into every report. Logs go to
stderr; data goes to files or stdout only.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import fields

import numpy as np

from . import embedstore, pipeline, report, seqcore
from .metrics import MetricsReport
from .neuralnet.params import Hyperparams, load_model, save_model
from .neuralnet.training import train as train_model

log = logging.getLogger("amylopred")

HYPER_KEYS = {f.name for f in fields(Hyperparams)}

CONFIG_DEFAULTS = {
    "embeddings": None,
    "labels": None,
    "fasta": None,
    "annotations": None,
    "model": None,
    "output": None,
    "endpoint": None,
    "k": 10,
    "test_fraction": 0.0,
    "min_len": 1,
    "figures": False,
}


class CliError(RuntimeError):
    pass


def parse_mode(text: str) -> tuple[str, int | None]:
    """Parse --mode values: pooled_unit | pooled_reshape:<T> | per_residue."""
    if text.startswith("pooled_reshape:"):
        try:
            return "pooled_reshape", int(text.split(":", 1)[1])
        except ValueError:
            raise CliError(f"bad reshape factor in mode {text!r}") from None
    if text in ("pooled_unit", "per_residue", "pooled_reshape"):
        return text, None
    raise CliError(f"unknown mode {text!r}")


def load_config(args: argparse.Namespace) -> dict:
    cfg = dict(CONFIG_DEFAULTS)
    for f in fields(Hyperparams):
        cfg[f.name] = f.default
    explicit: set[str] = set()  # keys set by the config file or flags
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read config {args.config}: {exc}") from exc
        unknown = set(file_cfg) - set(cfg)
        if unknown:
            raise CliError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg.update(file_cfg)
        explicit.update(file_cfg)
    for key, value in vars(args).items():
        if key in ("command", "config", "func", "mode") or value is None:
            continue
        cfg[key] = value
        explicit.add(key)
    if getattr(args, "mode", None):
        input_mode, reshape_t = parse_mode(args.mode)
        cfg["input_mode"] = input_mode
        explicit.add("input_mode")
        if reshape_t is not None:
            cfg["reshape_t"] = reshape_t
            explicit.add("reshape_t")
    cfg["_explicit"] = explicit
    return cfg


def hyper_from_config(cfg: dict) -> Hyperparams:
    return Hyperparams(**{k: cfg[k] for k in HYPER_KEYS})


def config_echo(cfg: dict) -> dict:
    return {
        k: v for k, v in sorted(cfg.items())
        if v is not None and not k.startswith("_")
    }


def _require(cfg: dict, *keys: str, inputs: tuple[str, ...] = ()) -> None:
    missing = [k for k in keys if not cfg.get(k)]
    if missing:
        raise CliError(f"missing required option(s): {', '.join(missing)}")
    for key in inputs:
        if not os.path.exists(cfg[key]):
            raise CliError(f"{key} path does not exist: {cfg[key]}")


def read_labels(path) -> dict[str, int]:
    """Labels TSV: id<TAB>label(0|1); '#' comments and blank lines ignored."""
    out: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or parts[1] not in ("0", "1"):
                raise CliError(f"{path}:{lineno}: expected 'id<TAB>0|1'")
            out[parts[0]] = int(parts[1])
    return out


def load_labeled_examples(cfg: dict) -> list[pipeline.LabeledExample]:
    records = embedstore.read_embeddings_file(cfg["embeddings"])
    labels = read_labels(cfg["labels"])
    missing = [rec.id for rec in records if rec.id not in labels]
    if missing:
        raise CliError(
            f"no label for embedding id(s): {', '.join(missing[:20])}"
            + (" ..." if len(missing) > 20 else "")
        )
    return [pipeline.LabeledExample(rec.id, rec, labels[rec.id]) for rec in records]


def load_sequences_with_embeddings(cfg: dict):
    with open(cfg["fasta"], encoding="utf-8") as fh:
        seqs = seqcore.parse_fasta(fh.read())
    by_id = {rec.id: rec for rec in embedstore.read_embeddings_file(cfg["embeddings"])}
    out = []
    for seq in seqs:
        rec = by_id.get(seq.id)
        if rec is None:
            raise CliError(f"no embeddings for sequence {seq.id!r}")
        if rec.matrix.shape[0] != len(seq):
            raise CliError(
                f"{seq.id!r}: {rec.matrix.shape[0]} embedding rows for "
                f"{len(seq)} residues"
            )
        out.append((seq, rec))
    return out


def _atomic_write_text(text: str, path) -> None:
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


# ------------------------------------------------------------- commands

def cmd_train(cfg: dict) -> int:
    _require(cfg, "embeddings", "labels", "model", "output", inputs=("embeddings", "labels"))
    hyper = hyper_from_config(cfg)
    examples = load_labeled_examples(cfg)
    heldout: MetricsReport | None = None
    train_ex = examples
    if cfg["test_fraction"]:
        train_ex, test_ex = pipeline.split_dataset(
            examples, cfg["test_fraction"], hyper.seed
        )
        log.info("split: %d train / %d held-out", len(train_ex), len(test_ex))
    model, history = train_model([(ex.x, ex.label) for ex in train_ex], hyper)
    if cfg["test_fraction"]:
        preds = pipeline._classify_examples(model, hyper, test_ex)
        from . import metrics as m

        heldout = m.metrics_report(m.confusion(preds, [e.label for e in test_ex]))
    save_model(model, hyper, cfg["model"])
    doc = {
        "command": "train",
        "seed": hyper.seed,
        "config": config_echo(cfg),
        "n_train": len(train_ex),
        "final_loss": history[-1],
        "loss_history": history,
    }
    if heldout is not None:
        doc["heldout"] = report.metrics_to_dict(heldout)
        print(report.metrics_table({"held-out": heldout}))
    report.write_json(doc, cfg["output"])
    if cfg["figures"]:
        log.info("figure: %s", report.render_loss_curve(history, cfg["output"]))
    return 0


def cmd_crossval(cfg: dict) -> int:
    _require(cfg, "embeddings", "labels", "output", inputs=("embeddings", "labels"))
    hyper = hyper_from_config(cfg)
    examples = load_labeled_examples(cfg)
    fold_reports, mean = pipeline.kfold_cv(examples, cfg["k"], hyper, hyper.seed)
    doc = {
        "command": "crossval",
        "seed": hyper.seed,
        "k": cfg["k"],
        "config": config_echo(cfg),
        "folds": [report.metrics_to_dict(r) for r in fold_reports],
        "mean": report.metrics_to_dict(mean),
    }
    report.write_json(doc, cfg["output"])
    rows = {f"fold {i + 1}": r for i, r in enumerate(fold_reports)}
    rows["mean"] = mean
    print(report.metrics_table(rows))
    if cfg["figures"]:
        log.info("figure: %s", report.render_fold_metrics(fold_reports, cfg["output"]))
    return 0


def _predict_traces(cfg: dict, hyper: Hyperparams, model):
    traces = []
    for seq, emb in load_sequences_with_embeddings(cfg):
        if len(seq) < hyper.window_w:
            log.warning(
                "skipping %r: length %d < window %d", seq.id, len(seq), hyper.window_w
            )
            continue
        traces.append(
            pipeline.predict_sequence(model, hyper, seq, emb, cfg["min_len"])
        )
    return traces


def _load_model_with_overrides(cfg: dict):
    """Load a model; only an explicitly given threshold overrides the
    trained one (the architecture-bearing hyperparameters always come from
    the model file)."""
    model, hyper = load_model(cfg["model"])
    if "threshold" in cfg.get("_explicit", ()):
        hyper = hyper.with_overrides(threshold=cfg["threshold"])
    return model, hyper


def cmd_predict(cfg: dict) -> int:
    _require(cfg, "model", "fasta", "embeddings", "output", inputs=("model", "fasta", "embeddings"))
    model, hyper = _load_model_with_overrides(cfg)
    traces = _predict_traces(cfg, hyper, model)
    lines = []
    for tr in traces:
        for pos, (res, score) in enumerate(zip(tr.residues, tr.residue_scores), start=1):
            lines.append(f"{tr.protein_id}\t{pos}\t{res}\t{score:.6f}")
        verdict = "amyloid" if tr.peptide_verdict else "non-amyloid"
        regions = ";".join(f"{r.start}-{r.end}" for r in tr.regions)
        lines.append(f"#verdict\t{tr.protein_id}\t{verdict}\tregions={regions}")
    _atomic_write_text("\n".join(lines) + "\n", cfg["output"])
    if cfg["figures"] and traces:
        log.info(
            "figure: %s",
            report.render_residue_profiles(traces, hyper.threshold, cfg["output"]),
        )
    return 0


def cmd_eval_peptides(cfg: dict) -> int:
    _require(cfg, "model", "fasta", "embeddings", "labels", "output", inputs=("model", "fasta", "embeddings", "labels"))
    model, hyper = _load_model_with_overrides(cfg)
    labels = read_labels(cfg["labels"])
    peptides = []
    for seq, emb in load_sequences_with_embeddings(cfg):
        if seq.id not in labels:
            raise CliError(f"no label for sequence {seq.id!r}")
        peptides.append((seq, emb, labels[seq.id]))
    if not peptides:
        raise CliError("empty peptide set")
    rep = pipeline.evaluate_peptides(model, hyper, peptides)
    doc = {
        "command": "eval-peptides",
        "seed": hyper.seed,
        "config": config_echo(cfg),
        **report.metrics_to_dict(rep),
    }
    report.write_json(doc, cfg["output"])
    print(report.metrics_table({"peptides": rep}))
    return 0


def cmd_eval_regions(cfg: dict) -> int:
    _require(cfg, "model", "fasta", "embeddings", "annotations", "output", inputs=("model", "fasta", "embeddings", "annotations"))
    model, hyper = _load_model_with_overrides(cfg)
    with open(cfg["annotations"], encoding="utf-8") as fh:
        truth = seqcore.parse_region_annotations(fh.read())
    traces = _predict_traces(cfg, hyper, model)
    if not traces:
        raise CliError("no sequence long enough to evaluate")
    rep = pipeline.evaluate_regions(traces, truth)
    doc = {
        "command": "eval-regions",
        "seed": hyper.seed,
        "config": config_echo(cfg),
        "sov": report.sov_to_dict(rep),
    }
    report.write_json(doc, cfg["output"])
    print(report.sov_table(rep))
    if cfg["figures"]:
        log.info("figure: %s", report.render_sov_bars(rep, cfg["output"]))
    return 0


def cmd_fetch_embeddings(cfg: dict) -> int:
    _require(cfg, "fasta", "output", inputs=("fasta",))
    if not cfg.get("endpoint"):
        raise CliError(
            "no embedding endpoint configured; start the embedder component "
            "(`esm-embedder serve`) or pass --endpoint"
        )
    with open(cfg["fasta"], encoding="utf-8") as fh:
        seqs = seqcore.parse_fasta(fh.read())
    records = embedstore.fetch_embeddings(cfg["endpoint"], seqs)
    tmp = f"{cfg['output']}.tmp{os.getpid()}"
    with open(tmp, "wb") as fh:
        embedstore.write_embeddings(records, fh)
    with open(tmp, "rb") as fh:
        embedstore.read_embeddings(fh)  # re-read check before publishing
    os.replace(tmp, cfg["output"])
    log.info("wrote %d record(s) to %s", len(records), cfg["output"])
    return 0


# ------------------------------------------------------------- entrypoint

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat JSON config file")
    common.add_argument("--seed", type=int, help="PRNG seed")
    common.add_argument("--threshold", type=float, help="classification threshold")
    common.add_argument(
        "--mode", help="input mode: pooled_unit | pooled_reshape:<T> | per_residue"
    )
    common.add_argument("--embeddings", help="AEMB embeddings file")
    common.add_argument("--labels", help="labels TSV (id<TAB>0|1)")
    common.add_argument("--fasta", help="FASTA input")
    common.add_argument("--annotations", help="region annotation TSV")
    common.add_argument("--model", help="model JSON path")
    common.add_argument("--output", help="output path (report/TSV/AEMB)")
    common.add_argument("--epochs", type=int)
    common.add_argument("--batch-size", dest="batch_size", type=int)
    common.add_argument("--k", type=int, help="cross-validation folds")
    common.add_argument("--test-fraction", dest="test_fraction", type=float)
    common.add_argument("--min-len", dest="min_len", type=int)
    common.add_argument("--endpoint", help="embedding producer base URL")
    common.add_argument(
        "--figures", action="store_const", const=True, default=None,
        help="also render PNG figures next to the output",
    )

    parser = argparse.ArgumentParser(
        prog="amylopred",
        description="Amyloidogenicity prediction from protein language model embeddings",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func, desc in (
        ("train", cmd_train, "train a model on labeled embeddings"),
        ("crossval", cmd_crossval, "stratified k-fold cross-validation"),
        ("predict", cmd_predict, "per-residue scores, regions, and verdicts"),
        ("eval-peptides", cmd_eval_peptides, "peptide-level confusion metrics"),
        ("eval-regions", cmd_eval_regions, "region-level SOV evaluation"),
        ("fetch-embeddings", cmd_fetch_embeddings, "fetch AEMB from a producer"),
    ):
        sp = sub.add_parser(name, parents=[common], help=desc)
        sp.set_defaults(func=func)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s"
    )
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        return args.func(cfg)
    except (CliError, OSError, ValueError, RuntimeError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
