"""Verified composition of NN feedback controllers for co-safe LTL tasks."""

__version__ = "0.1.0"
