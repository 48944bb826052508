"""Gabor and homogeneous wave front sets from sampled data."""

__version__ = "0.1.0"
