"""Spectral measures of clock Hamiltonians, path differences and random-walk decay."""

__version__ = "0.1.0"
