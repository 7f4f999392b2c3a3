"""Paralinguistic speech screening with gated convolutional networks."""

__version__ = "0.1.0"
