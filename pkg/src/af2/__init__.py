"""Executable kernel for second-order functional arithmetic."""

__version__ = "0.1.0"
