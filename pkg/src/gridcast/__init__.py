"""Coupled 2D grid broadcasting: simulation, counting forms, and witness verification."""

__version__ = "0.1.0"
