"""Robust ranking pipeline for era-grouped tabular panels."""

__version__ = "0.1.0"
