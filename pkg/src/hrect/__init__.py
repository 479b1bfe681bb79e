"""Multiscale flatness tools for point clouds in Heisenberg groups."""

__version__ = "0.1.0"
