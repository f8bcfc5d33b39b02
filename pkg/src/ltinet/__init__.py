"""Exact analysis and synthesis for LTI networks and decentralized control."""

__version__ = "0.1.0"
