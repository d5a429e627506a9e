"""Stingley indices, Hirzebruch defects and Smale invariants of immersions S^3 -> R^4."""

__version__ = "0.1.0"
