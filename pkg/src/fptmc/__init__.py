"""Fast first-passage-time Monte Carlo for correlated jump-diffusion firms."""

__version__ = "0.1.0"
