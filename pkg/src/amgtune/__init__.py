"""Algebraic multigrid with a learned tuner for the strong threshold and smoother."""

__version__ = "0.1.0"
