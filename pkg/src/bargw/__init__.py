"""Bifurcating autoregressive processes observed through a two-type Galton-Watson tree."""

__version__ = "0.1.0"
