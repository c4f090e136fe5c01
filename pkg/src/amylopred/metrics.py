"""Confusion-matrix metrics and the segment-overlap (SOV) measure.

All metric arithmetic runs on 64-bit floats computed from exact integer
counts; zero-denominator conventions: sensitivity/specificity/f1 -> 0,
MCC -> 0 when any factor under the root is zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .seqcore import Region


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(
            self.tp + other.tp, self.fp + other.fp,
            self.tn + other.tn, self.fn + other.fn,
        )


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    sensitivity: float
    specificity: float
    f1: float
    mcc: float
    confusion: ConfusionMatrix


@dataclass(frozen=True)
class SovReport:
    sov_apr: float
    sov_non_apr: float
    sov_average: float
    non_amyloid_count: int
    # pooled variants accumulate score/N across proteins instead of
    # averaging per-protein scores; reported alongside for verbose output
    pooled_apr: float | None = None
    pooled_non_apr: float | None = None


def confusion(predictions: Sequence[int], labels: Sequence[int]) -> ConfusionMatrix:
    if len(predictions) != len(labels) or not labels:
        raise ValueError("predictions and labels must have equal non-zero length")
    tp = fp = tn = fn = 0
    for p, y in zip(predictions, labels):
        if y:
            if p:
                tp += 1
            else:
                fn += 1
        else:
            if p:
                fp += 1
            else:
                tn += 1
    return ConfusionMatrix(tp, fp, tn, fn)


def _check_nonempty(cm: ConfusionMatrix) -> None:
    if cm.total == 0:
        raise ValueError("metrics are undefined on an all-zero confusion matrix")


def accuracy(cm: ConfusionMatrix) -> float:
    _check_nonempty(cm)
    return (cm.tn + cm.tp) / cm.total


def sensitivity(cm: ConfusionMatrix) -> float:
    _check_nonempty(cm)
    denom = cm.tp + cm.fn
    return cm.tp / denom if denom else 0.0


def specificity(cm: ConfusionMatrix) -> float:
    _check_nonempty(cm)
    denom = cm.tn + cm.fp
    return cm.tn / denom if denom else 0.0


def f1(cm: ConfusionMatrix) -> float:
    _check_nonempty(cm)
    denom = 2 * cm.tp + cm.fp + cm.fn
    return 2 * cm.tp / denom if denom else 0.0


def mcc(cm: ConfusionMatrix) -> float:
    _check_nonempty(cm)
    denom = (
        (cm.tp + cm.fp) * (cm.tp + cm.fn) * (cm.tn + cm.fp) * (cm.tn + cm.fn)
    )
    if denom == 0:
        return 0.0
    return (cm.tp * cm.tn - cm.fp * cm.fn) / math.sqrt(denom)


def metrics_report(cm: ConfusionMatrix) -> MetricsReport:
    return MetricsReport(
        accuracy(cm), sensitivity(cm), specificity(cm), f1(cm), mcc(cm), cm
    )


def _validate_regions(regions: Sequence[Region], seq_len: int, what: str) -> None:
    prev_end = 0
    for reg in regions:
        if reg.start < 1 or reg.end > seq_len or reg.start > reg.end:
            raise ValueError(f"{what}: malformed region {reg} for length {seq_len}")
        if reg.start <= prev_end + 1 and prev_end:
            raise ValueError(f"{what}: regions not normalized near {reg}")
        prev_end = reg.end


def sov_components(
    observed: Sequence[Region], predicted: Sequence[Region], seq_len: int
) -> tuple[float, int] | None:
    """Unnormalized segment-overlap pieces (100*score, N-normalizer).

    For each observed segment s1 with overlapping predicted segments P:
    if P is empty, N gains len(s1); otherwise for every s2 in P, N gains
    len(s1) and the score gains ((minov + delta) / maxov) * len(s1), where
    minov is the shared residue count, maxov the union-span extent, and
    delta = min(maxov - minov, minov, len(s1)//2, len(s2)//2).

    Returning the pieces lets callers aggregate either per-protein or
    pooled across proteins; returns None when `observed` is empty (the
    score is undefined for that class).
    """
    _validate_regions(observed, seq_len, "observed")
    _validate_regions(predicted, seq_len, "predicted")
    if not observed:
        return None
    score = 0.0
    normalizer = 0
    for s1 in observed:
        overlapping = [
            s2 for s2 in predicted if s2.start <= s1.end and s2.end >= s1.start
        ]
        if not overlapping:
            normalizer += len(s1)
            continue
        for s2 in overlapping:
            minov = min(s1.end, s2.end) - max(s1.start, s2.start) + 1
            maxov = max(s1.end, s2.end) - min(s1.start, s2.start) + 1
            delta = min(maxov - minov, minov, len(s1) // 2, len(s2) // 2)
            normalizer += len(s1)
            score += ((minov + delta) / maxov) * len(s1)
    return 100.0 * score, normalizer


def sov_class(
    observed: Sequence[Region], predicted: Sequence[Region], seq_len: int
) -> float | None:
    """Segment-overlap score for one class in [0, 100]; None when the
    observed class is empty (undefined)."""
    res = sov_components(observed, predicted, seq_len)
    if res is None:
        return None
    score, normalizer = res
    return score / normalizer


def complement_regions(regions: Sequence[Region], seq_len: int) -> tuple[Region, ...]:
    """Maximal intervals of [1, seq_len] not covered by `regions`."""
    _validate_regions(regions, seq_len, "regions")
    out: list[Region] = []
    cursor = 1
    for reg in regions:
        if reg.start > cursor:
            out.append(Region(cursor, reg.start - 1))
        cursor = reg.end + 1
    if cursor <= seq_len:
        out.append(Region(cursor, seq_len))
    return tuple(out)
