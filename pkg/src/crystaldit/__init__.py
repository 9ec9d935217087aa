"""Diffusion transformer for periodic crystal generation.

Crystals are encoded as a 23-token tensor (three lattice rows plus twenty
atom rows placing each element on a normalized periodic-table grid), a
DiT-style network is trained to predict DDPM noise, and samples are decoded
back to elements by Gaussian responsibility regions.
"""

__version__ = "0.1.0"
