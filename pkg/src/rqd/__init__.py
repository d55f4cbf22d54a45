"""Restarted quantum dynamics on a simulated noisy quantum computer."""

__version__ = "0.1.0"
