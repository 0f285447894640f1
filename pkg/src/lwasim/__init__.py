"""Leaky-wave antenna simulation for sub-THz multi-user downlink and direction finding."""

__version__ = "0.1.0"
