"""Mobility-aware stochastic geometry for drone base-station networks."""

__version__ = "0.1.0"
