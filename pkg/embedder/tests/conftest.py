import pytest
import torch
from transformers import EsmConfig, EsmModel
from transformers.utils import logging as hf_logging

from esm_embedder.core import Embedder, EmbedderConfig

hf_logging.disable_progress_bar()

TINY_DIM = 16
TINY_LAYERS = 2
TINY_MAX_POS = 40


@pytest.fixture(scope="session")
def tiny_checkpoint(tmp_path_factory):
    """A small randomly initialized checkpoint with the real 33-token
    vocabulary, saved locally so no test needs network access."""
    torch.manual_seed(0)
    config = EsmConfig(
        vocab_size=33,
        hidden_size=TINY_DIM,
        num_hidden_layers=TINY_LAYERS,
        num_attention_heads=2,
        intermediate_size=32,
        max_position_embeddings=TINY_MAX_POS,
        pad_token_id=1,
        mask_token_id=32,
        position_embedding_type="rotary",
    )
    path = tmp_path_factory.mktemp("checkpoint") / "tiny-esm"
    EsmModel(config).save_pretrained(path)
    return str(path)


@pytest.fixture(scope="session")
def embedder(tiny_checkpoint):
    return Embedder(EmbedderConfig(model_name=tiny_checkpoint))
