"""Standalone AEMB producer backed by a pretrained ESM-2 checkpoint."""

__version__ = "0.1.0"
