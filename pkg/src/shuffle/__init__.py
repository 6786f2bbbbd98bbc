"""Compiler toolkit for the Shuffle probabilistic inference language."""

__version__ = "0.1.0"
