"""Multivariate Brownian semistationary processes - simulation and realised covariation toolkit"""

__version__ = "0.1.0"
__all__ = [
    "kernel",
    "indexing",
    "simulate",
    "scaling",
    "covariation",
    "asymptotics",
    "harness",
    "sweep",
    "data_loader",
    "cli",
]
