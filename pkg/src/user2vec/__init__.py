"""Hybrid-filtering user representations (user2vec / context2vec) and look-alike evaluation."""

__version__ = "0.1.0"
