"""Exact and floating-point toolkit for BV algebras, BV renormalization-group flows and
their free gl(1|1) models."""

__version__ = "0.1.0"
