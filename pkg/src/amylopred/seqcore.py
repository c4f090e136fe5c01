"""Sequence data model, FASTA / annotation parsing, and peptide windowing.

Coordinates are 1-based inclusive in all external formats and 0-based
half-open internally; conversion happens only at parse/serialize
boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple

CANONICAL_RESIDUES = frozenset("ACDEFGHIKLMNPQRSTVWY")

DEFAULT_WINDOW = 6


class FastaError(ValueError):
    """Malformed FASTA input."""


class AnnotationError(ValueError):
    """Malformed region annotation input."""


class SequenceTooShort(ValueError):
    """Sequence shorter than the requested window length."""

    def __init__(self, seq_id: str, length: int, window: int):
        self.seq_id = seq_id
        self.length = length
        self.window = window
        super().__init__(
            f"sequence {seq_id!r} has length {length}, shorter than window {window}"
        )


class Region(NamedTuple):
    """1-based inclusive residue interval."""

    start: int
    end: int

    def __len__(self) -> int:  # type: ignore[override]
        return self.end - self.start + 1


@dataclass(frozen=True)
class AminoAcidSequence:
    id: str
    residues: str

    def __post_init__(self):
        if not self.id:
            raise FastaError("sequence identifier must be non-empty")
        if not self.residues:
            raise FastaError(f"sequence {self.id!r} is empty")
        for pos, ch in enumerate(self.residues, start=1):
            if ch not in CANONICAL_RESIDUES:
                raise FastaError(
                    f"sequence {self.id!r}: invalid residue {ch!r} at position {pos}"
                )

    def __len__(self) -> int:
        return len(self.residues)


@dataclass(frozen=True)
class HexWindow:
    parent_id: str
    offset: int  # 0-based start index into the parent sequence
    residues: str


@dataclass(frozen=True)
class RegionAnnotation:
    protein_id: str
    regions: tuple[Region, ...]  # sorted, merged, non-adjacent


def _decode(text: str | bytes) -> str:
    if isinstance(text, bytes):
        return text.decode("utf-8")
    return text


def parse_fasta(text: str | bytes) -> list[AminoAcidSequence]:
    """Parse FASTA text into sequence records.

    Wrapped sequence lines are concatenated, lowercase residues are
    uppercased, and the id is the header token up to the first whitespace.
    Raises FastaError for sequence data before any header or for residues
    outside the 20-letter canonical alphabet.
    """
    records: list[AminoAcidSequence] = []
    cur_id: str | None = None
    parts: list[str] = []

    def flush():
        if cur_id is not None:
            records.append(AminoAcidSequence(cur_id, "".join(parts)))

    for lineno, raw in enumerate(_decode(text).splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith(">"):
            flush()
            cur_id = line[1:].split()[0] if line[1:].split() else ""
            if not cur_id:
                raise FastaError(f"line {lineno}: empty FASTA header")
            parts = []
        else:
            if cur_id is None:
                raise FastaError(f"line {lineno}: sequence data before any header")
            parts.append(line.upper())
    flush()
    return records


def write_fasta(records: Iterable[AminoAcidSequence], width: int = 60) -> str:
    """Serialize records to FASTA text, wrapping sequence lines at `width`."""
    out: list[str] = []
    for rec in records:
        out.append(f">{rec.id}")
        for i in range(0, len(rec.residues), width):
            out.append(rec.residues[i : i + width])
    return "\n".join(out) + "\n" if out else ""


def windows(seq: AminoAcidSequence, w: int = DEFAULT_WINDOW) -> list[HexWindow]:
    """All length-`w` windows of `seq`, in offset order.

    Raises SequenceTooShort when the sequence has fewer than `w` residues;
    callers decide skip-vs-fail policy.
    """
    if w < 1:
        raise ValueError(f"window length must be >= 1, got {w}")
    L = len(seq)
    if L < w:
        raise SequenceTooShort(seq.id, L, w)
    return [
        HexWindow(seq.id, off, seq.residues[off : off + w]) for off in range(L - w + 1)
    ]


def normalize_regions(regions: Iterable[Region]) -> tuple[Region, ...]:
    """Sort and merge overlapping or adjacent regions."""
    ordered = sorted(regions)
    merged: list[Region] = []
    for reg in ordered:
        if merged and reg.start <= merged[-1].end + 1:
            merged[-1] = Region(merged[-1].start, max(merged[-1].end, reg.end))
        else:
            merged.append(reg)
    return tuple(merged)


def parse_region_annotations(text: str | bytes) -> list[RegionAnnotation]:
    """Parse region annotation TSV: `protein_id<TAB>start<TAB>end`.

    Coordinates are 1-based inclusive; multiple lines per protein are
    grouped and merged. '#'-prefixed comment lines and blank lines are
    ignored.
    """
    by_protein: dict[str, list[Region]] = {}
    for lineno, raw in enumerate(_decode(text).splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise AnnotationError(
                f"line {lineno}: expected 3 tab-separated fields, got {len(fields)}"
            )
        pid, s_txt, e_txt = fields
        if not pid:
            raise AnnotationError(f"line {lineno}: empty protein id")
        try:
            start, end = int(s_txt), int(e_txt)
        except ValueError:
            raise AnnotationError(f"line {lineno}: non-integer region bounds") from None
        if start < 1:
            raise AnnotationError(f"line {lineno}: start must be >= 1, got {start}")
        if start > end:
            raise AnnotationError(f"line {lineno}: start {start} > end {end}")
        by_protein.setdefault(pid, []).append(Region(start, end))
    return [
        RegionAnnotation(pid, normalize_regions(regs))
        for pid, regs in by_protein.items()
    ]
