"""Numerical laboratory for curl-free Ginzburg-Landau vortices."""

__version__ = "0.1.0"
