"""Conditionally exactly solvable potentials: spectra, wavefunctions and their checks."""

__version__ = "0.1.0"
