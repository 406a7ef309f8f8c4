"""Outage damage-location analytics from crew vehicle telemetry."""

__version__ = "0.1.0"
