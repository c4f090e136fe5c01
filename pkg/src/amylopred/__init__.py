"""Amyloidogenicity prediction from protein language model embeddings.

Pipeline: per-residue embeddings are mean-pooled, classified by a
from-scratch Bi-LSTM -> Bi-GRU -> sigmoid network, distributed back to
residues by sliding-window averaging, and evaluated with confusion-matrix
metrics and the segment-overlap (SOV) score.
"""

__version__ = "0.1.0"
