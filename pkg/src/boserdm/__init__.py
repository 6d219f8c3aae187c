"""Reduced density matrices and subsystem dynamics of identical bosons."""

__version__ = "0.1.0"
