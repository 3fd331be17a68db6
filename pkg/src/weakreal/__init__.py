"""Weak-measurement contextuality tests on qubit registers."""

__version__ = "0.1.0"
