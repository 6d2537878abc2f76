"""Logistic regression diagnostics and constrained association-rule mining."""

__version__ = "0.1.0"
