"""Pseudo-spectral lab for the radiating-gas model."""

__version__ = "0.1.0"
