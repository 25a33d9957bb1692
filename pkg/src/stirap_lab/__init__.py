"""Simulation toolkit for adiabatic population transfer in few-level systems."""

__version__ = "0.1.0"
