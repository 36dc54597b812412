"""Numerical tensor calculus and energy-momentum identity verification."""

__version__ = "0.1.0"
