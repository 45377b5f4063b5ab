"""Graph transformer with attention from simulated quantum correlations."""

__version__ = "0.1.0"
