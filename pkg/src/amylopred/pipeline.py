"""Dataset splitting, cross-validation, sliding-window scoring, residue
aggregation, peptide verdicts, and region-level evaluation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import metrics
from .embedstore import ResidueEmbeddings, mean_pool, PooledEmbedding
from .metrics import MetricsReport, SovReport
from .neuralnet.network import forward_batch, to_timesteps
from .neuralnet.params import Hyperparams, ModelParams
from .neuralnet.training import train
from .seqcore import (
    AminoAcidSequence,
    Region,
    RegionAnnotation,
    SequenceTooShort,
    normalize_regions,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LabeledExample:
    id: str
    x: np.ndarray | ResidueEmbeddings | PooledEmbedding
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")


@dataclass
class PredictionTrace:
    protein_id: str
    residues: str
    window_scores: list[float]
    residue_scores: list[float]
    regions: tuple[Region, ...]
    peptide_verdict: bool


class EvaluationError(RuntimeError):
    pass


def _stratified_order(examples: Sequence[LabeledExample], rng) -> dict[int, list[int]]:
    by_class: dict[int, list[int]] = {0: [], 1: []}
    for idx, ex in enumerate(examples):
        by_class[ex.label].append(idx)
    return {lab: list(rng.permutation(idxs)) for lab, idxs in by_class.items() if idxs}


def split_dataset(
    examples: Sequence[LabeledExample], test_fraction: float, seed: int
) -> tuple[list[LabeledExample], list[LabeledExample]]:
    """Stratified train/test split; per-class test size is
    floor(class_size * test_fraction), remainder to train."""
    if not (0.0 < test_fraction < 1.0):
        raise ValueError("test_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    order = _stratified_order(examples, rng)
    for lab, idxs in order.items():
        if len(idxs) < 2:
            raise ValueError(f"class {lab} has fewer than 2 members; cannot stratify")
    train_idx: list[int] = []
    test_idx: list[int] = []
    for _, idxs in sorted(order.items()):
        n_test = int(len(idxs) * test_fraction)
        test_idx.extend(idxs[:n_test])
        train_idx.extend(idxs[n_test:])
    return (
        [examples[i] for i in sorted(train_idx)],
        [examples[i] for i in sorted(test_idx)],
    )


def stratified_folds(
    examples: Sequence[LabeledExample], k: int, seed: int
) -> list[list[int]]:
    """k stratified validation folds as index lists; exact disjoint
    partition, per-class fold sizes differing by at most 1."""
    if k < 2:
        raise ValueError("k must be >= 2")
    rng = np.random.default_rng(seed)
    order = _stratified_order(examples, rng)
    for lab, idxs in order.items():
        if len(idxs) < k:
            raise ValueError(f"class {lab} has {len(idxs)} members, fewer than k={k}")
    folds: list[list[int]] = [[] for _ in range(k)]
    for _, idxs in sorted(order.items()):
        for pos, idx in enumerate(idxs):
            folds[pos % k].append(int(idx))
    return [sorted(f) for f in folds]


def _classify_examples(model, hyper, examples: Sequence[LabeledExample]):
    preds = []
    for ex in examples:
        xs = to_timesteps(ex.x, hyper)
        p, _ = forward_batch(model, hyper, xs[None, :, :], training=False)
        preds.append(1 if p[0] >= hyper.threshold else 0)
    return preds


def kfold_cv(
    examples: Sequence[LabeledExample], k: int, hyper: Hyperparams, seed: int
) -> tuple[list[MetricsReport], MetricsReport]:
    """Stratified k-fold cross-validation.

    Each fold trains with its own PRNG stream derived from (seed, fold
    index); the mean report averages each metric arithmetically over folds
    and carries the summed confusion matrix.
    """
    examples = list(examples)
    folds = stratified_folds(examples, k, seed)
    reports: list[MetricsReport] = []
    for fold_idx, val_idx in enumerate(folds):
        val_set = set(val_idx)
        train_ex = [ex for i, ex in enumerate(examples) if i not in val_set]
        val_ex = [examples[i] for i in val_idx]
        rng = np.random.default_rng([seed, fold_idx])
        model, _ = train([(ex.x, ex.label) for ex in train_ex], hyper, rng=rng)
        preds = _classify_examples(model, hyper, val_ex)
        cm = metrics.confusion(preds, [ex.label for ex in val_ex])
        reports.append(metrics.metrics_report(cm))
    total_cm = reports[0].confusion
    for rep in reports[1:]:
        total_cm = total_cm + rep.confusion
    mean = MetricsReport(
        accuracy=float(np.mean([r.accuracy for r in reports])),
        sensitivity=float(np.mean([r.sensitivity for r in reports])),
        specificity=float(np.mean([r.specificity for r in reports])),
        f1=float(np.mean([r.f1 for r in reports])),
        mcc=float(np.mean([r.mcc for r in reports])),
        confusion=total_cm,
    )
    return reports, mean


def score_windows(
    model: ModelParams,
    hyper: Hyperparams,
    seq: AminoAcidSequence,
    embeddings: ResidueEmbeddings,
) -> list[float]:
    """Evaluation-mode score for every length-w window of the sequence.

    Each window's input is built from the embedding rows it covers: kept
    per-residue or mean-pooled first, per the active input mode.
    """
    w = hyper.window_w
    L = len(seq)
    if embeddings.matrix.shape[0] != L:
        raise ValueError(
            f"{seq.id!r}: embeddings have {embeddings.matrix.shape[0]} rows "
            f"for a {L}-residue sequence"
        )
    if L < w:
        raise SequenceTooShort(seq.id, L, w)
    inputs = []
    for off in range(L - w + 1):
        rows = embeddings.matrix[off : off + w]
        if hyper.input_mode == "per_residue":
            inputs.append(rows)
        else:
            pooled = mean_pool(ResidueEmbeddings(seq.id, rows))
            inputs.append(to_timesteps(pooled, hyper))
    xs = np.stack(inputs)
    p, _ = forward_batch(model, hyper, xs, training=False)
    return [float(v) for v in p]


def residue_scores(window_scores: Sequence[float], L: int, w: int) -> list[float]:
    """Distribute window scores back to residues: residue i averages the
    scores of windows with offsets in [max(0, i-w+1), min(i, L-w)]."""
    if len(window_scores) != L - w + 1:
        raise ValueError(
            f"expected {L - w + 1} window scores for L={L}, w={w}, "
            f"got {len(window_scores)}"
        )
    out = []
    for i in range(L):
        lo = max(0, i - w + 1)
        hi = min(i, L - w)
        covering = window_scores[lo : hi + 1]
        out.append(sum(covering) / len(covering))
    return out


def classify_peptide(window_scores: Sequence[float], threshold: float) -> bool:
    """Amyloidogenic iff any window score reaches the threshold
    (boundary inclusive)."""
    if not window_scores:
        raise ValueError("classify_peptide needs at least one window score")
    return max(window_scores) >= threshold


def extract_regions(
    residue_scores: Sequence[float], threshold: float, min_len: int = 1
) -> tuple[Region, ...]:
    """Maximal runs of residues scoring >= threshold, as 1-based inclusive
    regions; runs shorter than min_len are dropped."""
    regions: list[Region] = []
    start = None
    for i, score in enumerate(residue_scores):
        if score >= threshold:
            if start is None:
                start = i
        elif start is not None:
            regions.append(Region(start + 1, i))
            start = None
    if start is not None:
        regions.append(Region(start + 1, len(residue_scores)))
    return tuple(reg for reg in regions if len(reg) >= min_len)


def predict_sequence(
    model: ModelParams,
    hyper: Hyperparams,
    seq: AminoAcidSequence,
    embeddings: ResidueEmbeddings,
    min_len: int = 1,
) -> PredictionTrace:
    wscores = score_windows(model, hyper, seq, embeddings)
    rscores = residue_scores(wscores, len(seq), hyper.window_w)
    return PredictionTrace(
        protein_id=seq.id,
        residues=seq.residues,
        window_scores=wscores,
        residue_scores=rscores,
        regions=extract_regions(rscores, hyper.threshold, min_len),
        peptide_verdict=classify_peptide(wscores, hyper.threshold),
    )


def evaluate_peptides(
    model: ModelParams,
    hyper: Hyperparams,
    peptides: Sequence[tuple[AminoAcidSequence, ResidueEmbeddings, int]],
) -> MetricsReport:
    """Window-level scoring + max-window verdict for each peptide, scored
    against its label. Peptides shorter than the window are skipped with a
    warning; if every peptide is too short, evaluation fails."""
    preds, labels, skipped = [], [], []
    for seq, emb, label in peptides:
        if len(seq) < hyper.window_w:
            skipped.append(seq.id)
            continue
        wscores = score_windows(model, hyper, seq, emb)
        preds.append(1 if classify_peptide(wscores, hyper.threshold) else 0)
        labels.append(label)
    if skipped:
        log.warning(
            "skipped %d peptide(s) shorter than w=%d: %s",
            len(skipped), hyper.window_w, ", ".join(skipped),
        )
    if not preds:
        raise EvaluationError(
            f"no peptide reaches window length {hyper.window_w}; "
            f"too short: {', '.join(skipped)}"
        )
    return metrics.metrics_report(metrics.confusion(preds, labels))


def evaluate_regions(
    traces: Sequence[PredictionTrace],
    truth: Sequence[RegionAnnotation],
) -> SovReport:
    """SOV over APR and non-APR classes, averaged per protein (unweighted);
    pooled-across-proteins variants are reported alongside. Proteins whose
    observed class is empty are excluded from that class's average."""
    truth_by_id = {ann.protein_id: ann for ann in truth}
    apr_vals: list[float] = []
    non_vals: list[float] = []
    pooled = {"apr": [0.0, 0], "non": [0.0, 0]}
    non_amyloid = 0
    for trace in traces:
        ann = truth_by_id.get(trace.protein_id)
        if ann is None:
            raise EvaluationError(f"no annotation for protein {trace.protein_id!r}")
        L = len(trace.residues)
        observed = normalize_regions(ann.regions)
        predicted = normalize_regions(trace.regions)
        if not predicted:
            non_amyloid += 1
        for key, obs, pred in (
            ("apr", observed, predicted),
            ("non", metrics.complement_regions(observed, L),
             metrics.complement_regions(predicted, L)),
        ):
            comp = metrics.sov_components(obs, pred, L)
            if comp is None:
                continue
            score, normalizer = comp
            vals = apr_vals if key == "apr" else non_vals
            vals.append(score / normalizer)
            pooled[key][0] += score
            pooled[key][1] += normalizer
    if not apr_vals and not non_vals:
        raise EvaluationError("no protein had a defined SOV class")
    sov_apr = float(np.mean(apr_vals)) if apr_vals else 0.0
    sov_non = float(np.mean(non_vals)) if non_vals else 0.0
    return SovReport(
        sov_apr=sov_apr,
        sov_non_apr=sov_non,
        sov_average=(sov_apr + sov_non) / 2.0,
        non_amyloid_count=non_amyloid,
        pooled_apr=pooled["apr"][0] / pooled["apr"][1] if pooled["apr"][1] else None,
        pooled_non_apr=pooled["non"][0] / pooled["non"][1] if pooled["non"][1] else None,
    )
