"""Overlapping inference for long-form speech recognition."""

__version__ = "0.1.0"
