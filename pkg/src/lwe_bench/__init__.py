"""Desk-scale toolkit for benchmarking attacks on LWE, RLWE and MLWE."""

__version__ = "0.1.0"
