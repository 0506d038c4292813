"""Constrained frequency-domain waveform inversion with total-variation
and one-sided total-variation constraints."""

__version__ = "0.1.0"
