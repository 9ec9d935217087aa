"""Tolerance-based comparison of two periodic structures.

The test has three stages: same reduced composition; lattice lengths and
angles within tolerance; and a one-to-one pairing of same-species sites,
after a rigid fractional translation, with every pair closer than
``stol * (V / N) ** (1/3)``.  No supercells and no volume rescaling are
attempted.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DegenerateLattice
from .lattice import from_params, lattice_params, periodic_distance_matrix, volume


@dataclass(frozen=True)
class MatcherTolerances:
    ltol: float = 0.2
    stol: float = 0.3
    angle_tol: float = 5.0

    def __post_init__(self):
        if min(self.ltol, self.stol, self.angle_tol) <= 0:
            raise ValueError("matcher tolerances must be positive")


def _params(structure):
    if volume(structure.lattice) <= 0:
        raise DegenerateLattice(f"{structure!r} has zero volume")
    return np.array(lattice_params(structure.lattice))


def lattices_close(p1, p2, tol):
    lengths1, lengths2 = p1[:3], p2[:3]
    ratio = np.maximum(lengths1, lengths2) / np.minimum(lengths1, lengths2)
    return bool(np.all(ratio - 1 <= tol.ltol) and np.all(np.abs(p1[3:] - p2[3:]) <= tol.angle_tol))


def _species_blocks(structure):
    species = np.asarray(structure.species)
    return {int(z): np.flatnonzero(species == z) for z in np.unique(species)}


def _all_within(lattice, f1, f2, blocks1, blocks2, shift, threshold):
    """Whether some same-species pairing keeps every pair within ``threshold``.

    Also returns the mean fractional displacement of the least-squares
    pairing, used to refine the translation.
    """
    ok = True
    disp = []
    for z, i1 in blocks1.items():
        i2 = blocks2[z]
        a = f1[i1] + shift
        b = f2[i2]
        dist = periodic_distance_matrix(lattice, a, b)
        too_far = dist > threshold
        rows, cols = linear_sum_assignment(too_far)
        if too_far[rows, cols].any():
            ok = False
        rows, cols = linear_sum_assignment(dist)
        d = b[cols] - a[rows]
        disp.append(d - np.round(d))
    return ok, np.concatenate(disp).mean(axis=0)


def structures_match(s1, s2, tol=MatcherTolerances()):
    if s1.reduced_composition != s2.reduced_composition or s1.num_atoms != s2.num_atoms:
        return False
    p1, p2 = _params(s1), _params(s2)
    if not lattices_close(p1, p2, tol):
        return False
    lattice = from_params(*((p1 + p2) / 2))
    threshold = tol.stol * (volume(lattice) / s1.num_atoms) ** (1 / 3)
    blocks1, blocks2 = _species_blocks(s1), _species_blocks(s2)
    anchor = min(blocks1, key=lambda z: (len(blocks1[z]), z))
    f1, f2 = s1.frac_coords, s2.frac_coords
    for i in blocks1[anchor]:
        for j in blocks2[anchor]:
            shift = f2[j] - f1[i]
            ok, mean_disp = _all_within(lattice, f1, f2, blocks1, blocks2, shift, threshold)
            if ok:
                return True
            ok, _ = _all_within(lattice, f1, f2, blocks1, blocks2, shift + mean_disp, threshold)
            if ok:
                return True
    return False
