"""MIC estimation from panels of microbial growth curves."""

__version__ = "0.1.0"
