"""Numerical laboratory for non-selfadjoint Schrodinger operators with slowly decaying potentials."""
__version__ = "0.1.0"
