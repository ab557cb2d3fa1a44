"""Desk-scale prompt-routing inference serving stack with simulated batching backends."""

__version__ = "0.1.0"
