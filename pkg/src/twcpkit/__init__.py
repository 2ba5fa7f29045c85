"""Satellite carrier-phase frequency transfer: simulation and analysis."""

__version__ = "0.1.0"
