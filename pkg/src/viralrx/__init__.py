"""Antiviral repurposing experiments on virus protein sequences."""

__version__ = "0.1.0"
