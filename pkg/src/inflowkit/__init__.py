"""Failure-inflow prediction and change-footprint clustering for software releases."""

__version__ = "0.1.0"
