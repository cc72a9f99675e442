"""Numerical Komatu-Loewner evolutions, BMD Poisson kernels and SLE statistics."""

from skle.geometry import SlitVector, shift_slits, scale_slits, radius

__all__ = ["SlitVector", "shift_slits", "scale_slits", "radius"]
__version__ = "0.1.0"
