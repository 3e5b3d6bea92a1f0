"""Certifying non-classicality from simulated von Neumann measurement data."""

__version__ = "0.1.0"
