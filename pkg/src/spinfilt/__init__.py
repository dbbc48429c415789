"""Filter functions and exact propagators for conditional gates built from pi-pulse sequences."""

__version__ = "0.1.0"
