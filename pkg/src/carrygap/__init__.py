"""Carry-gap pipeline: option-implied discount factors, OIS benchmark, path-risk regressions."""

__version__ = "0.1.0"
