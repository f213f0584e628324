"""Frequency-domain staggered-grid Maxwell solver for exterior scattering
with a vanishing-absorption frequency schedule and a verification suite."""

__version__ = "0.1.0"
