"""Numerical lab for normalized Schroedinger-Poisson ground states in the small-mass regime."""

__version__ = "0.1.0"
