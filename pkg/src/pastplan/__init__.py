"""Temporal goals for FOND planning, derived from what a robot perceives."""

__version__ = "0.1.0"
