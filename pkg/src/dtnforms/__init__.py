"""Dirichlet-to-Neumann operators on differential forms, discretized with Whitney forms."""

__version__ = "0.1.0"
