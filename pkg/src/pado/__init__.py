"""Approximate distance oracles for planar graphs."""

__version__ = "0.1.0"
