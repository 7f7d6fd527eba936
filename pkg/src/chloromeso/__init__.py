"""Mesoscale chloride ingress simulation for pre-stressed concrete sections."""

__version__ = "0.1.0"
