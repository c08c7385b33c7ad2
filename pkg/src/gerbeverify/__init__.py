"""Numerical verification of the connective data of the cup product and basic bundle gerbes."""

__version__ = "0.1.0"
