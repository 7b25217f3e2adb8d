"""Synthesize poor-to-good English sentence pairs for GEC pre-training."""

__version__ = "0.1.0"
