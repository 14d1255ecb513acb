"""Diffusion-ordered molecular channel: simulation and information-theoretic diagnostics."""

__version__ = "0.1.0"
