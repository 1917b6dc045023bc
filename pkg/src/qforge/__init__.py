"""Design and verification of heralded two-mode photon-number states."""

__version__ = "0.1.0"
