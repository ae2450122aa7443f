"""Discretized incidence geometry at finite resolution."""

__version__ = "0.1.0"
