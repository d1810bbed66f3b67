"""Connections, Pfaffian cascades and hodograph solutions for Jordan-block
systems of hydrodynamic type."""

__version__ = "0.1.0"
