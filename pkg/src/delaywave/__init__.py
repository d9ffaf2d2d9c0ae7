"""Traveling waves of delayed reaction-diffusion systems by monotone iteration."""

__version__ = "0.1.0"
