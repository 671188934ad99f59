"""Inversion of cavity-coupled Moessbauer nuclei: collective dynamics, spectra and photon budgets."""

__version__ = "0.1.0"
