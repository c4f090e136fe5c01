import io

import numpy as np
import pytest
import torch

from esm_embedder.core import (
    ESM2_TOKENS,
    Embedder,
    EmbedderConfig,
    EmbedderError,
    SequenceTooLong,
    encode,
    embed_fasta,
)
from esm_embedder.fastaio import FastaError, FastaRecord, parse_fasta

from conftest import TINY_DIM, TINY_LAYERS, TINY_MAX_POS

# The consumer's reader is the authoritative validator of emitted files.
from amylopred.embedstore import ResidueEmbeddings, mean_pool, read_embeddings

HEX = FastaRecord("hex", "STVIIE")


class TestVocab:
    def test_token_table(self):
        assert len(ESM2_TOKENS) == 33
        assert ESM2_TOKENS[0] == "<cls>"
        assert ESM2_TOKENS[2] == "<eos>"
        assert ESM2_TOKENS[4] == "L"
        assert ESM2_TOKENS[32] == "<mask>"

    def test_encode_brackets_with_specials(self):
        ids = encode("LA")
        assert ids == [0, 4, 5, 2]


class TestFasta:
    def test_parse_basic(self):
        recs = parse_fasta(">a desc\nSTV\nIIE\n>b\nWALTW\n")
        assert [(r.id, r.residues) for r in recs] == [("a", "STVIIE"), ("b", "WALTW")]

    def test_lowercase_uppercased(self):
        assert parse_fasta(">a\nstviie\n")[0].residues == "STVIIE"

    @pytest.mark.parametrize("text,msg", [
        ("", "no FASTA records"),
        (">a\n", "empty sequence"),
        ("STV\n", "before any header"),
        (">a\nSTZ\n", "non-canonical"),
        (">a\nSTV\n>a\nIIE\n", "duplicate"),
    ])
    def test_errors(self, text, msg):
        with pytest.raises(FastaError, match=msg):
            parse_fasta(text)


class TestEmbedRecord:
    def test_one_row_per_residue(self, embedder):
        matrix = embedder.embed_record(HEX)
        assert matrix.shape == (6, TINY_DIM)
        assert matrix.dtype == np.float32

    def test_special_tokens_stripped(self, embedder):
        # full hidden states include two extra positions; the emitted rows
        # must equal the interior slice exactly
        ids = torch.tensor([encode(HEX.residues)])
        with torch.no_grad():
            out = embedder.model(
                ids, attention_mask=torch.ones_like(ids), output_hidden_states=True
            )
        full = out.hidden_states[embedder.layer][0].numpy()
        assert full.shape[0] == 8
        np.testing.assert_array_equal(embedder.embed_record(HEX), full[1:-1])

    def test_mean_matches_independent_pooling(self, embedder):
        matrix = embedder.embed_record(HEX)
        pooled = mean_pool(ResidueEmbeddings(HEX.id, matrix)).vector
        naive = matrix.astype(np.float64).mean(axis=0)
        assert np.allclose(pooled, naive, atol=1e-5)

    def test_deterministic(self, embedder):
        a = embedder.embed_record(HEX)
        b = embedder.embed_record(HEX)
        assert a.tobytes() == b.tobytes()

    def test_too_long_names_id(self, embedder):
        rec = FastaRecord("giant", "A" * (TINY_MAX_POS - 1))
        with pytest.raises(SequenceTooLong, match="'giant'"):
            embedder.embed_record(rec)

    def test_max_length_accepted(self, embedder):
        rec = FastaRecord("edge", "A" * (TINY_MAX_POS - 2))
        assert embedder.embed_record(rec).shape == (TINY_MAX_POS - 2, TINY_DIM)


class TestLayerSelection:
    def test_default_is_final_layer(self, embedder):
        assert embedder.layer == TINY_LAYERS

    def test_layer_zero_differs_from_final(self, tiny_checkpoint, embedder):
        early = Embedder(EmbedderConfig(model_name=tiny_checkpoint, layer=0))
        assert not np.allclose(early.embed_record(HEX), embedder.embed_record(HEX))

    def test_out_of_range_layer(self, tiny_checkpoint):
        with pytest.raises(EmbedderError, match="out of range"):
            Embedder(EmbedderConfig(model_name=tiny_checkpoint, layer=TINY_LAYERS + 1))

    def test_missing_checkpoint(self, tmp_path):
        with pytest.raises(EmbedderError, match="could not load"):
            Embedder(EmbedderConfig(model_name=str(tmp_path / "nope")))


class TestEmittedFiles:
    FASTA = ">p1\nSTVIIE\n>p2\nWALTWALTW\n"

    def test_consumer_reader_validates_output(self, embedder):
        payload = embedder.embed_fasta_bytes(self.FASTA)
        records = read_embeddings(io.BytesIO(payload))
        assert [r.id for r in records] == ["p1", "p2"]
        assert [r.matrix.shape for r in records] == [(6, TINY_DIM), (9, TINY_DIM)]

    def test_identical_input_identical_bytes(self, embedder):
        assert embedder.embed_fasta_bytes(self.FASTA) == embedder.embed_fasta_bytes(
            self.FASTA
        )

    def test_embed_fasta_file_op(self, tiny_checkpoint, tmp_path):
        fasta = tmp_path / "in.fasta"
        fasta.write_text(self.FASTA)
        out = tmp_path / "out.aemb"
        n = embed_fasta(EmbedderConfig(model_name=tiny_checkpoint), fasta, out)
        assert n == 2
        records = read_embeddings(io.BytesIO(out.read_bytes()))
        assert [len(r.matrix) for r in records] == [6, 9]


@pytest.mark.skipif(
    not pytest.importorskip("huggingface_hub").try_to_load_from_cache(
        "facebook/esm2_t33_650M_UR50D", "config.json"
    ),
    reason="default 650M checkpoint not cached locally",
)
def test_default_checkpoint_dimension():
    embedder = Embedder(EmbedderConfig())
    assert embedder.dim == 1280
    assert embedder.embed_record(HEX).shape == (6, 1280)
