"""Robust linear regression under contamination, its certificate, and hard-instance generators."""

__version__ = "0.1.0"
