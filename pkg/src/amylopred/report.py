"""Report serialization (JSON + plain-text tables) and figure rendering."""

from __future__ import annotations

import json
import os
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .metrics import MetricsReport, SovReport
from .pipeline import PredictionTrace

METRIC_COLUMNS = ("accuracy", "sensitivity", "specificity", "f1", "mcc")


def write_json(doc: dict, path) -> None:
    """Atomically write a report; stable key order so reruns are
    byte-identical."""
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")
    os.replace(tmp, path)


def metrics_to_dict(rep: MetricsReport) -> dict:
    return {
        "confusion": {
            "tp": rep.confusion.tp,
            "fp": rep.confusion.fp,
            "tn": rep.confusion.tn,
            "fn": rep.confusion.fn,
        },
        "metrics": {
            "accuracy": round(rep.accuracy, 3),
            "sensitivity": round(rep.sensitivity, 3),
            "specificity": round(rep.specificity, 3),
            "f1": round(rep.f1, 3),
            "mcc": round(rep.mcc, 3),
        },
    }


def sov_to_dict(rep: SovReport) -> dict:
    out = {
        "sov_apr": round(rep.sov_apr, 3),
        "sov_non_apr": round(rep.sov_non_apr, 3),
        "sov_average": round(rep.sov_average, 3),
        "non_amyloid_count": rep.non_amyloid_count,
    }
    if rep.pooled_apr is not None:
        out["pooled_apr"] = round(rep.pooled_apr, 3)
    if rep.pooled_non_apr is not None:
        out["pooled_non_apr"] = round(rep.pooled_non_apr, 3)
    return out


def metrics_table(rows: dict[str, MetricsReport]) -> str:
    """Plain-text metric table, one labeled row per report."""
    name_w = max(len(n) for n in rows) + 2
    header = "".join(c.capitalize().ljust(13) for c in METRIC_COLUMNS)
    lines = [" " * name_w + header]
    for name, rep in rows.items():
        vals = [getattr(rep, c) for c in METRIC_COLUMNS]
        lines.append(name.ljust(name_w) + "".join(f"{v:<13.3f}" for v in vals))
    return "\n".join(lines)


def sov_table(rep: SovReport) -> str:
    lines = [
        "              SOV_APR      SOV_Non-APR  SOV_Average  Non-amyloid",
        "This run      "
        + f"{rep.sov_apr:<13.1f}{rep.sov_non_apr:<13.1f}"
        + f"{rep.sov_average:<13.1f}{rep.non_amyloid_count}",
    ]
    return "\n".join(lines)


def _figure_path(output_path, suffix: str) -> str:
    stem, _ = os.path.splitext(str(output_path))
    return f"{stem}_{suffix}.png"


def render_loss_curve(history: Sequence[float], output_path) -> str:
    path = _figure_path(output_path, "loss")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(range(1, len(history) + 1, 1), history, lw=1.5)
    ax.set_xlabel("epoch")
    ax.set_ylabel("training loss (BCE)")
    ax.set_title("Training loss")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_fold_metrics(fold_reports: Sequence[MetricsReport], output_path) -> str:
    path = _figure_path(output_path, "folds")
    fig, ax = plt.subplots(figsize=(7, 4))
    x = range(1, len(fold_reports) + 1)
    for col in METRIC_COLUMNS:
        ax.plot(x, [getattr(r, col) for r in fold_reports], marker="o", label=col)
    ax.set_xlabel("fold")
    ax.set_ylabel("score")
    ax.set_ylim(-1.0 if any(r.mcc < 0 for r in fold_reports) else 0.0, 1.05)
    ax.set_title("Per-fold cross-validation metrics")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_residue_profiles(
    traces: Sequence[PredictionTrace], threshold: float, output_path, max_panels: int = 12
) -> str:
    path = _figure_path(output_path, "profiles")
    shown = list(traces)[:max_panels]
    fig, axes = plt.subplots(
        len(shown), 1, figsize=(8, 1.8 * len(shown)), squeeze=False, sharex=False
    )
    for ax, trace in zip(axes[:, 0], shown):
        positions = range(1, len(trace.residue_scores) + 1)
        ax.plot(positions, trace.residue_scores, lw=1.2)
        ax.axhline(threshold, color="red", lw=0.8, ls="--")
        for reg in trace.regions:
            ax.axvspan(reg.start, reg.end, color="orange", alpha=0.25)
        ax.set_ylim(0, 1)
        ax.set_ylabel("score", fontsize=8)
        ax.set_title(trace.protein_id, fontsize=9, loc="left")
    axes[-1, 0].set_xlabel("residue position")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_sov_bars(rep: SovReport, output_path) -> str:
    path = _figure_path(output_path, "sov")
    fig, ax = plt.subplots(figsize=(5, 4))
    names = ["SOV_APR", "SOV_Non-APR", "SOV_Average"]
    vals = [rep.sov_apr, rep.sov_non_apr, rep.sov_average]
    ax.bar(names, vals, color=["#4472c4", "#ed7d31", "#70ad47"])
    ax.set_ylim(0, 100)
    ax.set_ylabel("SOV")
    for i, v in enumerate(vals):
        ax.text(i, v + 1, f"{v:.1f}", ha="center", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
