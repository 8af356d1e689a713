"""Numerical laboratory for 1D multi-interface Cahn-Hilliard-type dynamics."""
__version__ = "0.1.0"
