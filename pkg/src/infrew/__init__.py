"""Coinductive infinitary rewriting over non-wellfounded derivation trees."""

__version__ = "0.1.0"
