"""Spacecraft mission analysis and formation trajectory optimization toolkit."""

__version__ = "0.1.0"
