"""Time-fractional p-Laplacian problems with a double-singular Hardy potential."""

__version__ = "0.1.0"
