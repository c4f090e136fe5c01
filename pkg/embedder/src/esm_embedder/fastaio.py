"""Minimal FASTA reader for the embedder's input side.

Deliberately self-contained: the embedder talks to consumers only through
the FASTA and AEMB wire formats, never through their code.
"""

from __future__ import annotations

from dataclasses import dataclass

CANONICAL_RESIDUES = frozenset("ACDEFGHIKLMNPQRSTVWY")


class FastaError(ValueError):
    pass


@dataclass(frozen=True)
class FastaRecord:
    id: str
    residues: str

    def __len__(self) -> int:
        return len(self.residues)


def parse_fasta(text: str) -> list[FastaRecord]:
    """Parse FASTA text into records; ids are the first header token,
    residues are uppercased and restricted to the 20 canonical letters."""
    records: list[FastaRecord] = []
    current_id: str | None = None
    chunks: list[str] = []

    def flush() -> None:
        if current_id is None:
            return
        residues = "".join(chunks).upper()
        if not residues:
            raise FastaError(f"record {current_id!r}: empty sequence")
        for pos, ch in enumerate(residues, start=1):
            if ch not in CANONICAL_RESIDUES:
                raise FastaError(
                    f"record {current_id!r}: non-canonical residue "
                    f"{ch!r} at position {pos}"
                )
        records.append(FastaRecord(current_id, residues))

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith(">"):
            flush()
            header = line[1:].strip()
            if not header:
                raise FastaError(f"line {lineno}: empty header")
            current_id = header.split()[0]
            chunks = []
        else:
            if current_id is None:
                raise FastaError(f"line {lineno}: sequence data before any header")
            chunks.append(line)
    flush()
    if not records:
        raise FastaError("no FASTA records found")
    seen: set[str] = set()
    for rec in records:
        if rec.id in seen:
            raise FastaError(f"duplicate record id {rec.id!r}")
        seen.add(rec.id)
    return records
