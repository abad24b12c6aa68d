"""Infinite products of nonnegative matrices and the measures they represent."""

__version__ = "0.1.0"
