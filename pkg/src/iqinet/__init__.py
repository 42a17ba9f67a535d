"""Learned mapper/demapper pairs that cope with transmit and receive I/Q imbalance."""

__version__ = "0.1.0"
