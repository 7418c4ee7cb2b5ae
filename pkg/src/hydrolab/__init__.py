"""Hydrostatic-limit simulation and estimate certification on the 3-torus."""

__version__ = "0.1.0"
