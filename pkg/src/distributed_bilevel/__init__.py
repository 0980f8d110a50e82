"""Simulator for a loopless penalty-based distributed bilevel solver with a verification layer."""

__version__ = "0.1.0"
