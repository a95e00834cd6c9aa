"""Blowup extraction in dense graphs."""

__version__ = "0.1.0"
