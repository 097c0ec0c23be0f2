"""Polynomial birth-death approximation: equilibria, Stein solutions and bounds."""

__version__ = "0.1.0"
