"""Capsule geometry, maximal functions, covering and drift-Poisson kernel checks."""

__version__ = "0.1.0"
