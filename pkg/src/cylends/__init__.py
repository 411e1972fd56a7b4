"""Numerical laboratory for harmonic functions on asymptotically cylindrical surfaces."""
__version__ = "0.1.0"
