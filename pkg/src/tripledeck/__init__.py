"""Spectral solver and verification suite for the stationary Triple-Deck equations near Couette flow."""

from . import cli, elliptic_a, errors, norms, oracle, reduction, resolvent, rigidity, specfn, spectral
from .spectral import Field, GridSpec, LineFunction

__all__ = [
    "cli",
    "elliptic_a",
    "errors",
    "norms",
    "oracle",
    "reduction",
    "resolvent",
    "rigidity",
    "specfn",
    "spectral",
    "Field",
    "GridSpec",
    "LineFunction",
]

__version__ = "0.1.0"
