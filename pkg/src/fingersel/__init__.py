"""Finger selection for MMSE selective-Rake receivers in TH-IR UWB."""

__version__ = "0.1.0"
