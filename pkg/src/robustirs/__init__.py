"""Robust beamforming and learning for IRS-assisted wireless power links."""

__version__ = "0.1.0"
