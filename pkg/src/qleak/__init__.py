"""Leakage and seepage characterization of quantum channels, including
leakage randomized benchmarking."""

__version__ = "0.1.0"
