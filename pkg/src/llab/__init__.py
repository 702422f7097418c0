"""Hyperbolic metrics on planar domains through v = exp(-u) and the boundary coefficient c3."""

__version__ = "0.1.0"
