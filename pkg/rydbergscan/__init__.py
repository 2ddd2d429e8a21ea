"""Simulation of laser-driven Rydberg superatom chains and extraction of C6 from their excitation spectra."""

__version__ = "0.1.0"
