"""Symmetry-constrained planar diffeomorphisms built from Fourier vector fields."""

__version__ = "0.1.0"
