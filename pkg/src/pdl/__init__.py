"""Particle dynamics lab: Monte Carlo tools for activated random walks,
boundary-modified contact processes, and subcritical branching processes."""

__version__ = "0.1.0"
