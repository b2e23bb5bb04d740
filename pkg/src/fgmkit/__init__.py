"""Flamelet tabulation and machine-learned surrogates for tabulated chemistry."""

__version__ = "0.1.0"
