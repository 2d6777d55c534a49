"""Numerical laboratory for the slip-wall Stokes operator and its functional calculus."""

__version__ = "0.1.0"
