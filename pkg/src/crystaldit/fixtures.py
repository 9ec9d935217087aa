"""Deterministic synthetic crystals for tests and smoke runs.

Every structure comes from a small prototype (rocksalt, CsCl, cubic
perovskite, L1_2 alloy) filled with species whose oxidation states make
it charge neutral, or with metals only.  Cells are cubic or slightly
tetragonal with edge lengths in [3, 8] Angstrom.
"""

import numpy as np

from .chem import atomic_number
from .tensorize import CrystalStructure

ROCKSALT_SITES = (
    (0, 0, 0), (0, .5, .5), (.5, 0, .5), (.5, .5, 0),
    (.5, .5, .5), (.5, 0, 0), (0, .5, 0), (0, 0, .5),
)
CSCL_SITES = ((0, 0, 0), (.5, .5, .5))
PEROVSKITE_SITES = ((0, 0, 0), (.5, .5, .5), (.5, .5, 0), (.5, 0, .5), (0, .5, .5))
L12_SITES = ((0, 0, 0), (.5, .5, 0), (.5, 0, .5), (0, .5, .5))

ROCKSALT_PAIRS = (("Na", "Cl"), ("K", "Br"), ("Li", "F"), ("Mg", "O"), ("Ca", "S"), ("Sr", "O"))
CSCL_PAIRS = (("Cs", "Cl"), ("Cs", "Br"), ("Fe", "Ni"), ("Cu", "Zn"), ("Ni", "Al"))
PEROVSKITE_PAIRS = (("Sr", "Ti"), ("Ba", "Ti"), ("K", "Nb"), ("La", "Al"), ("Ca", "Zr"))
L12_PAIRS = (("Au", "Cu"), ("Al", "Ni"), ("Pt", "Fe"))

PROTOTYPES = ("rocksalt", "cscl", "perovskite", "l12")


def _species(proto, a, b):
    za, zb = atomic_number(a), atomic_number(b)
    if proto == "rocksalt":
        return [za] * 4 + [zb] * 4, ROCKSALT_SITES
    if proto == "cscl":
        return [za, zb], CSCL_SITES
    if proto == "perovskite":
        return [za, zb] + [atomic_number("O")] * 3, PEROVSKITE_SITES
    return [za] + [zb] * 3, L12_SITES


def _edge_range(proto):
    # keeps nearest-neighbour distances well above 0.5 Angstrom
    return (4.0, 8.0) if proto == "rocksalt" else (3.0, 6.0)


def make_structure(proto, pair, a, c_ratio=1.0):
    species, sites = _species(proto, *pair)
    c = float(np.clip(a * c_ratio, 3.0, 8.0))
    return CrystalStructure(np.diag([a, a, c]), species, np.array(sites, dtype=np.float64))


def make_synthetic_dataset(n, seed=0):
    """``n`` valid crystals drawn deterministically from ``seed``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    pairs = {"rocksalt": ROCKSALT_PAIRS, "cscl": CSCL_PAIRS,
             "perovskite": PEROVSKITE_PAIRS, "l12": L12_PAIRS}
    out = []
    for k in range(n):
        proto = PROTOTYPES[k % len(PROTOTYPES)]
        choices = pairs[proto]
        pair = choices[rng.integers(len(choices))]
        lo, hi = _edge_range(proto)
        a = float(rng.uniform(lo, hi))
        ratio = float(rng.uniform(0.9, 1.1))
        out.append(make_structure(proto, pair, round(a, 4), round(ratio, 4)))
    return out
