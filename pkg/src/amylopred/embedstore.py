"""Per-residue embedding container (AEMB), mean pooling, and fetch client.

AEMB layout, little-endian throughout:
    magic "AEMB" | version byte 0x01 | u32 D | u32 record count
    per record: u16 id byte-length | UTF-8 id | u32 L | L*D float32, row-major
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterable, Sequence

import numpy as np
import requests

from .seqcore import AminoAcidSequence, write_fasta

MAGIC = b"AEMB"
VERSION = 1


class FormatError(ValueError):
    """Malformed AEMB stream; carries the byte offset of the fault."""

    def __init__(self, offset: int, message: str):
        self.offset = offset
        super().__init__(f"AEMB format error at byte {offset}: {message}")


class FetchError(RuntimeError):
    """Embedding fetch failed; no partial results are returned."""


@dataclass(frozen=True)
class ResidueEmbeddings:
    id: str
    matrix: np.ndarray  # (L, D) float32

    def __post_init__(self):
        m = self.matrix
        if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
            raise ValueError(f"record {self.id!r}: matrix must be (L>=1, D>=1), got {m.shape}")
        if m.dtype != np.float32:
            raise ValueError(f"record {self.id!r}: matrix must be float32, got {m.dtype}")
        if not np.all(np.isfinite(m)):
            raise ValueError(f"record {self.id!r}: matrix contains non-finite values")


@dataclass(frozen=True)
class PooledEmbedding:
    id: str
    vector: np.ndarray  # (D,) float32


def mean_pool(e: ResidueEmbeddings) -> PooledEmbedding:
    """Column-wise mean over residues.

    Accumulated in float64 in fixed row order, rounded to float32 at the
    end, so the result is deterministic across platforms and thread counts.
    """
    acc = e.matrix.astype(np.float64).sum(axis=0) / e.matrix.shape[0]
    return PooledEmbedding(e.id, acc.astype(np.float32))


def write_embeddings(records: Sequence[ResidueEmbeddings], sink: BinaryIO) -> int:
    """Write records as an AEMB stream; returns the byte count written."""
    if not records:
        raise ValueError("cannot write an empty record list (D would be undefined)")
    dim = records[0].matrix.shape[1]
    for rec in records:
        if rec.matrix.shape[1] != dim:
            raise ValueError(
                f"record {rec.id!r} has D={rec.matrix.shape[1]}, expected {dim}"
            )
    n = 0
    n += sink.write(MAGIC)
    n += sink.write(bytes([VERSION]))
    n += sink.write(struct.pack("<II", dim, len(records)))
    for rec in records:
        id_bytes = rec.id.encode("utf-8")
        if len(id_bytes) > 0xFFFF:
            raise ValueError(f"record id too long: {rec.id[:40]!r}...")
        n += sink.write(struct.pack("<H", len(id_bytes)))
        n += sink.write(id_bytes)
        n += sink.write(struct.pack("<I", rec.matrix.shape[0]))
        n += sink.write(np.ascontiguousarray(rec.matrix, dtype="<f4").tobytes())
    return n


def read_embeddings(source: BinaryIO) -> list[ResidueEmbeddings]:
    """Read an AEMB stream; inverse of write_embeddings, bit-exact."""
    offset = 0

    def take(count: int, what: str) -> bytes:
        nonlocal offset
        buf = source.read(count)
        if len(buf) != count:
            raise FormatError(offset, f"truncated stream while reading {what}")
        offset += count
        return buf

    if take(4, "magic") != MAGIC:
        raise FormatError(0, "bad magic (expected 'AEMB')")
    version = take(1, "version")[0]
    if version != VERSION:
        raise FormatError(4, f"unsupported version {version}")
    dim, count = struct.unpack("<II", take(8, "header"))
    if dim == 0:
        raise FormatError(5, "D must be >= 1")
    records: list[ResidueEmbeddings] = []
    for i in range(count):
        (id_len,) = struct.unpack("<H", take(2, f"record {i} id length"))
        rec_offset = offset
        rec_id = take(id_len, f"record {i} id").decode("utf-8")
        (rows,) = struct.unpack("<I", take(4, f"record {i} row count"))
        if rows == 0:
            raise FormatError(offset - 4, f"record {rec_id!r}: L must be >= 1")
        data_offset = offset
        raw = take(rows * dim * 4, f"record {rec_id!r} matrix")
        matrix = np.frombuffer(raw, dtype="<f4").reshape(rows, dim).astype(np.float32)
        if not np.all(np.isfinite(matrix)):
            raise FormatError(data_offset, f"record {rec_id!r}: non-finite float")
        if not rec_id:
            raise FormatError(rec_offset, f"record {i}: empty id")
        records.append(ResidueEmbeddings(rec_id, matrix))
    return records


def read_embeddings_file(path) -> list[ResidueEmbeddings]:
    with open(path, "rb") as fh:
        return read_embeddings(fh)


def write_embeddings_file(records: Sequence[ResidueEmbeddings], path) -> int:
    with open(path, "wb") as fh:
        return write_embeddings(records, fh)


def fetch_embeddings(
    endpoint: str,
    sequences: Sequence[AminoAcidSequence],
    timeout: float = 300.0,
) -> list[ResidueEmbeddings]:
    """Fetch per-residue embeddings from an external producer.

    Request body is FASTA text POSTed to the producer's /embed path;
    response body is an AEMB stream. Records are returned in request
    order; any transport failure, missing id, or length mismatch raises
    FetchError with no partial results.
    """
    if not sequences:
        return []
    url = endpoint.rstrip("/")
    if not url.endswith("/embed"):
        url += "/embed"
    body = write_fasta(sequences).encode("utf-8")
    try:
        resp = requests.post(
            url, data=body, headers={"Content-Type": "text/plain"}, timeout=timeout
        )
    except requests.RequestException as exc:
        raise FetchError(f"transport failure contacting {url}: {exc}") from exc
    if not (200 <= resp.status_code < 300):
        raise FetchError(
            f"producer at {url} returned status {resp.status_code}: "
            f"{resp.text[:200]}"
        )
    try:
        records = read_embeddings(io.BytesIO(resp.content))
    except FormatError as exc:
        raise FetchError(f"producer returned malformed AEMB: {exc}") from exc
    by_id = {rec.id: rec for rec in records}
    ordered: list[ResidueEmbeddings] = []
    for seq in sequences:
        rec = by_id.get(seq.id)
        if rec is None:
            raise FetchError(f"producer response missing id {seq.id!r}")
        if rec.matrix.shape[0] != len(seq):
            raise FetchError(
                f"id {seq.id!r}: producer returned {rec.matrix.shape[0]} rows "
                f"for a {len(seq)}-residue sequence"
            )
        ordered.append(rec)
    return ordered
