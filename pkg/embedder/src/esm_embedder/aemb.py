"""Writer for the AEMB binary embedding container.

Layout: magic b"AEMB", version byte 0x01, little-endian u32 dimension D,
u32 record count; then per record a u16 id length, the UTF-8 id, a u32 row
count L, and L*D float32 values row-major.
"""

from __future__ import annotations

import struct
from typing import BinaryIO, Sequence

import numpy as np

MAGIC = b"AEMB"
VERSION = 1


def write_aemb(records: Sequence[tuple[str, np.ndarray]], stream: BinaryIO) -> int:
    """Write (id, matrix) pairs; matrices must be 2-D float32 with a common
    second dimension. Returns the number of bytes written."""
    if not records:
        raise ValueError("cannot write an empty AEMB file")
    dim = records[0][1].shape[1]
    written = 0
    written += stream.write(MAGIC)
    written += stream.write(struct.pack("<BII", VERSION, dim, len(records)))
    for rec_id, matrix in records:
        if matrix.ndim != 2 or matrix.shape[1] != dim:
            raise ValueError(
                f"record {rec_id!r}: expected shape (L, {dim}), got {matrix.shape}"
            )
        encoded = rec_id.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise ValueError(f"record id too long: {rec_id!r}")
        written += stream.write(struct.pack("<H", len(encoded)))
        written += stream.write(encoded)
        written += stream.write(struct.pack("<I", matrix.shape[0]))
        written += stream.write(
            np.ascontiguousarray(matrix, dtype="<f4").tobytes()
        )
    return written
