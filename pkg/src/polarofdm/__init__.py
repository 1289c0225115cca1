"""Polar-coded OFDM link simulator."""

__version__ = "0.1.0"
