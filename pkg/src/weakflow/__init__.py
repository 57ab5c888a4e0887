"""Steady Boussinesq solver and Lorentz-space verification suite."""
__version__ = "0.1.0"
