"""Charge-neutrality and electronegativity screening of compositions."""

from functools import reduce
from math import gcd

import numpy as np

from .chem import MAX_Z, element_info

# enumeration budget standing in for a wall-clock timeout
DEFAULT_MAX_COMBINATIONS = 1 << 22
_CHUNK = 1 << 18


def _reduced_counts(species):
    zs, counts = np.unique(np.asarray(species, dtype=int), return_counts=True)
    div = reduce(gcd, counts.tolist())
    return zs.tolist(), (counts // div).tolist()


def compositional_validity(species, max_combinations=DEFAULT_MAX_COMBINATIONS):
    """True when the composition is all-metal, or some assignment of one
    oxidation state per element is charge neutral and every cation is no
    more electronegative than every anion.

    Assignments are enumerated in a fixed order; exceeding
    ``max_combinations`` without success counts as invalid.
    """
    zs, counts = _reduced_counts(species)
    if any(z < 1 or z > MAX_Z for z in zs):
        return False
    elements = [element_info(z) for z in zs]
    if all(el.is_metal for el in elements):
        return True
    states = [el.oxidation_states for el in elements]
    if any(len(s) == 0 for s in states):
        return False
    chi = np.array([np.nan if el.pauling_electronegativity is None else el.pauling_electronegativity
                    for el in elements])
    radix = [len(s) for s in states]
    table = [np.asarray(s) for s in states]
    counts = np.asarray(counts)
    total = int(np.prod(radix, dtype=object))
    limit = min(total, max_combinations)
    for start in range(0, limit, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, limit))
        digits = np.unravel_index(idx, radix)
        ox = np.stack([table[k][d] for k, d in enumerate(digits)], axis=1)
        neutral = ox[(ox @ counts) == 0]
        for assignment in neutral:
            if _pauling_ok(assignment, chi):
                return True
    return False


def _pauling_ok(assignment, chi):
    cations = chi[assignment > 0]
    anions = chi[assignment < 0]
    if np.isnan(cations).any() or np.isnan(anions).any():
        return False
    if len(cations) == 0 or len(anions) == 0:
        return True
    return bool(cations.max() <= anions.min())
