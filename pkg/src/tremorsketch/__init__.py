"""Spiral/wave sketch classification with an attention-gated CNN ensemble."""

__version__ = "0.1.0"
