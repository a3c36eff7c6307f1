"""Generalized (Colombeau-style) pseudo-Riemannian geometry on a single chart."""

__version__ = "0.1.0"
