"""Modular robot evolution with heritability and diversity analysis."""

__version__ = "0.1.0"
