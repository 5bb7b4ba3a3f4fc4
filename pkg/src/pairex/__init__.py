"""Condensate and pair-excitation dynamics for interacting bosons on a periodic grid."""

__version__ = "0.1.0"
