"""Lattice geometry: normalization, parameters, volume, periodic distances, density.

A lattice is a 3x3 array whose rows are the cell vectors in Angstrom.
"""

import itertools
from typing import NamedTuple

import numpy as np

from .chem import element_info
from .errors import DegenerateLattice, NonFinite

L_MAX = 46.7425
AMU_GRAMS = 1.66053906660e-24
A3_TO_CM3 = 1e-24

# image offsets searched for minimum distances; adequate unless a cell is
# thinner than the distance threshold being tested
IMAGE_OFFSETS = np.array(list(itertools.product((-1, 0, 1), repeat=3)), dtype=np.float64)


class LatticeParams(NamedTuple):
    a: float
    b: float
    c: float
    alpha: float
    beta: float
    gamma: float


def _as_lattice(lattice):
    lattice = np.asarray(lattice, dtype=np.float64)
    if lattice.shape != (3, 3):
        raise ValueError(f"lattice must be 3x3, got shape {lattice.shape}")
    if not np.all(np.isfinite(lattice)):
        raise NonFinite("lattice has non-finite entries")
    return lattice


def normalize(lattice):
    return _as_lattice(lattice) / L_MAX


def denormalize(lattice_norm):
    return _as_lattice(lattice_norm) * L_MAX


def volume(lattice):
    # scalar triple product: exact for diagonal cells, unlike an LU determinant
    lat = _as_lattice(lattice)
    return float(abs(np.dot(lat[0], np.cross(lat[1], lat[2]))))


def lattice_params(lattice):
    """Lengths (Angstrom) and angles (degrees); angles are NaN for zero-length vectors."""
    lattice = np.asarray(lattice, dtype=np.float64)
    a, b, c = np.linalg.norm(lattice, axis=1)

    def angle(u, v, nu, nv):
        with np.errstate(invalid="ignore", divide="ignore"):
            cos = np.dot(u, v) / (nu * nv)
        return float(np.degrees(np.arccos(np.clip(cos, -1.0, 1.0))))

    return LatticeParams(
        float(a), float(b), float(c),
        angle(lattice[1], lattice[2], b, c),
        angle(lattice[0], lattice[2], a, c),
        angle(lattice[0], lattice[1], a, b),
    )


def from_params(a, b, c, alpha, beta, gamma):
    """Lattice matrix with ``a`` along x and ``b`` in the xy-plane.

    Raises DegenerateLattice when the angles cannot close a cell.
    """
    al, be, ga = np.radians([alpha, beta, gamma])
    cos_a, cos_b, cos_g = np.cos(al), np.cos(be), np.cos(ga)
    sin_g = np.sin(ga)
    if abs(sin_g) < 1e-12:
        raise DegenerateLattice("gamma of 0 or 180 degrees")
    cx = c * cos_b
    cy = c * (cos_a - cos_b * cos_g) / sin_g
    cz2 = c * c - cx * cx - cy * cy
    if not cz2 > 0:
        raise DegenerateLattice(f"angles ({alpha}, {beta}, {gamma}) do not form a cell")
    return np.array([
        [a, 0.0, 0.0],
        [b * cos_g, b * sin_g, 0.0],
        [cx, cy, np.sqrt(cz2)],
    ])


def periodic_distance_matrix(lattice, frac_a, frac_b):
    """Minimum-image Cartesian distances between two sets of fractional points.

    Differences are wrapped to [-0.5, 0.5) and then every offset in
    {-1, 0, 1}^3 is tried.  Returns an array of shape (len(frac_a), len(frac_b)).
    """
    lattice = _as_lattice(lattice)
    diff = np.asarray(frac_b, dtype=np.float64)[None, :, :] - np.asarray(frac_a, dtype=np.float64)[:, None, :]
    diff -= np.round(diff)
    images = diff[:, :, None, :] + IMAGE_OFFSETS[None, None, :, :]
    cart = images @ lattice
    return np.sqrt(np.min(np.sum(cart * cart, axis=-1), axis=-1))


def min_periodic_distance(lattice, frac_coords):
    """Smallest interatomic distance including periodic images.

    Self pairs count only through nonzero lattice translations.
    """
    lattice = _as_lattice(lattice)
    if abs(np.linalg.det(lattice)) <= 1e-12 * np.prod(np.linalg.norm(lattice, axis=1)):
        raise DegenerateLattice("singular lattice")
    frac = np.atleast_2d(np.asarray(frac_coords, dtype=np.float64))
    if len(frac) == 0:
        raise ValueError("need at least one site")
    dist = periodic_distance_matrix(lattice, frac, frac)
    np.fill_diagonal(dist, np.inf)
    # a site's own images: shortest nonzero lattice translation
    self_images = IMAGE_OFFSETS[np.any(IMAGE_OFFSETS != 0, axis=1)] @ lattice
    shortest_translation = np.sqrt(np.min(np.sum(self_images * self_images, axis=1)))
    return float(min(dist.min(), shortest_translation))


def density(structure):
    """Mass density in g/cm^3."""
    vol = volume(structure.lattice)
    if vol == 0.0:
        raise DegenerateLattice("zero-volume cell")
    mass = sum(element_info(int(z)).atomic_mass for z in structure.species)
    return mass * AMU_GRAMS / (vol * A3_TO_CM3)
