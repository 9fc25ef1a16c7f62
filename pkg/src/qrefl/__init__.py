"""Quantum reflection of atoms from Casimir-van der Waals surface potentials."""

__version__ = "0.1.0"
