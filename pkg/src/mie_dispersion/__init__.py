"""Mie-series eigenfunctions and frequency-localized propagator kernels for
Maxwell's equations outside a perfectly conducting ball."""

__version__ = "0.1.0"
