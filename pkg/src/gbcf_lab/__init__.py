"""Simulation lab for the two-user Gaussian broadcast channel with feedback."""

__version__ = "0.1.0"
