"""Streaming out-of-distribution detection with a dynamic OOD dictionary."""

__version__ = "0.1.0"
