"""Context-sensitivity estimation toolkit for dual-condition toxicity annotations."""

__version__ = "0.1.0"
