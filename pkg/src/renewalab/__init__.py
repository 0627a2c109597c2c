"""Numerical laboratory for the renewal theorem of non-centered Markov random walks."""

__version__ = "0.1.0"
