"""Stochastic-volatility smiles from the geometry of the delta-space."""

__version__ = "0.1.0"
