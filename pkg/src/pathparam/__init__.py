"""Path-parametric geometry, spatial dynamics, corridors and time-optimal planning."""

__version__ = "0.1.0"
