"""issforge: from machine-readable ISA descriptions to a fast instruction-set simulator."""

__version__ = "0.1.0"
