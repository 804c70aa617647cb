"""Simulator for faithful federated learning mechanisms with VCG-style payments."""

__version__ = "0.1.0"
