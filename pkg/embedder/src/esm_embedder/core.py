"""Embedding extraction: run an ESM-2 checkpoint over sequences and keep
the per-residue hidden states of a chosen layer, with the begin/end special
tokens stripped so each record has exactly one row per residue."""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from transformers import EsmModel

from .aemb import write_aemb
from .fastaio import FastaRecord, parse_fasta

log = logging.getLogger(__name__)

DEFAULT_MODEL = "facebook/esm2_t33_650M_UR50D"

# The ESM-2 token order is fixed across all checkpoint sizes, so the mapping
# can live here instead of requiring tokenizer files next to the weights.
ESM2_TOKENS = (
    "<cls>", "<pad>", "<eos>", "<unk>",
    "L", "A", "G", "V", "S", "E", "R", "T", "I", "D", "P", "K",
    "Q", "N", "F", "Y", "M", "H", "W", "C", "X", "B", "U", "Z", "O",
    ".", "-", "<null_1>", "<mask>",
)
TOKEN_TO_ID = {tok: i for i, tok in enumerate(ESM2_TOKENS)}
CLS_ID = TOKEN_TO_ID["<cls>"]
EOS_ID = TOKEN_TO_ID["<eos>"]


class EmbedderError(RuntimeError):
    pass


class SequenceTooLong(EmbedderError):
    def __init__(self, seq_id: str, length: int, limit: int):
        super().__init__(
            f"sequence {seq_id!r} has {length} residues but the model "
            f"accepts at most {limit}"
        )


@dataclass(frozen=True)
class EmbedderConfig:
    model_name: str = DEFAULT_MODEL
    layer: int | None = None  # None = final layer
    device: str = "cpu"


def encode(residues: str) -> list[int]:
    """Token ids for one sequence: <cls>, one id per residue, <eos>."""
    return [CLS_ID, *(TOKEN_TO_ID[ch] for ch in residues), EOS_ID]


class Embedder:
    """Loads the checkpoint once; thereafter stateless per request."""

    def __init__(self, config: EmbedderConfig):
        self.config = config
        try:
            self.model = EsmModel.from_pretrained(config.model_name)
        except OSError as exc:
            raise EmbedderError(
                f"could not load checkpoint {config.model_name!r} "
                f"(not cached and not reachable?): {exc}"
            ) from exc
        self.model.eval()
        self.model.to(config.device)
        n_layers = self.model.config.num_hidden_layers
        self.layer = n_layers if config.layer is None else config.layer
        if not 0 <= self.layer <= n_layers:
            raise EmbedderError(
                f"layer {self.layer} out of range for a {n_layers}-layer model"
            )
        self.dim = self.model.config.hidden_size
        # -2 leaves room for the <cls>/<eos> positions; absolute position
        # tables additionally reserve padding_idx+1 leading slots
        budget = self.model.config.max_position_embeddings - 2
        if self.model.config.position_embedding_type == "absolute":
            budget -= self.model.config.pad_token_id + 1
        self.max_residues = budget
        log.info(
            "loaded %s: %d layers, D=%d, using layer %d",
            config.model_name, n_layers, self.dim, self.layer,
        )

    def embed_record(self, record: FastaRecord) -> np.ndarray:
        """Per-residue embedding matrix of shape (len(record), D)."""
        if len(record) > self.max_residues:
            raise SequenceTooLong(record.id, len(record), self.max_residues)
        ids = torch.tensor([encode(record.residues)], device=self.config.device)
        with torch.no_grad():
            out = self.model(
                ids,
                attention_mask=torch.ones_like(ids),
                output_hidden_states=True,
            )
        hidden = out.hidden_states[self.layer][0]
        rows = hidden[1:-1]  # strip <cls> and <eos> positions
        matrix = rows.cpu().numpy().astype(np.float32)
        assert matrix.shape == (len(record), self.dim)
        return matrix

    def embed_records(self, records: list[FastaRecord]) -> list[tuple[str, np.ndarray]]:
        return [(rec.id, self.embed_record(rec)) for rec in records]

    def embed_fasta_bytes(self, fasta_text: str) -> bytes:
        """FASTA text in, AEMB bytes out — the /embed wire contract."""
        records = parse_fasta(fasta_text)
        buf = io.BytesIO()
        write_aemb(self.embed_records(records), buf)
        return buf.getvalue()


def embed_fasta(config: EmbedderConfig, fasta_path: str | Path, out_path: str | Path) -> int:
    """File-to-file operation; returns the number of records written."""
    records = parse_fasta(Path(fasta_path).read_text())
    embedder = Embedder(config)
    with open(out_path, "wb") as fh:
        write_aemb(embedder.embed_records(records), fh)
    return len(records)
