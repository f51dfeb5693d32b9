"""Opportunistic duty cycling for solar-harvesting sensor nodes."""

__version__ = "0.1.0"
