"""Motif-based semantic graphs and negative-free contrastive node embeddings."""

__version__ = "0.1.0"
