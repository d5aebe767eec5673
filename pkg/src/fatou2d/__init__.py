"""Fatou coordinates for germs of (C^2, 0) tangent to the identity."""

__version__ = "0.1.0"
