import itertools
from math import gcd
from functools import reduce

import pytest
from hypothesis import given, strategies as st

from crystaldit.chem import atomic_number, element_info
from crystaldit.composition import compositional_validity


def oracle(species):
    """Plain exhaustive search over itertools.product, no vectorization."""
    counts = {}
    for z in species:
        counts[z] = counts.get(z, 0) + 1
    div = reduce(gcd, counts.values())
    zs = sorted(counts)
    els = [element_info(z) for z in zs]
    if all(e.is_metal for e in els):
        return True
    for states in itertools.product(*[e.oxidation_states for e in els]):
        if sum(s * counts[z] // div for s, z in zip(states, zs)) != 0:
            continue
        cat = [e.pauling_electronegativity for e, s in zip(els, states) if s > 0]
        an = [e.pauling_electronegativity for e, s in zip(els, states) if s < 0]
        if any(x is None for x in cat + an):
            continue
        if not cat or not an or max(cat) <= min(an):
            return True
    return False


def _species(formula):
    out = []
    for sym, n in formula:
        out += [atomic_number(sym)] * n
    return out


@pytest.mark.parametrize("formula, expected", [
    ([("Na", 1), ("Cl", 1)], True),
    ([("Fe", 2), ("Ni", 1)], True),
    ([("Na", 1), ("Cl", 2)], False),
    ([("Mg", 1), ("O", 1)], True),
    ([("Sr", 1), ("Ti", 1), ("O", 3)], True),
    ([("Ne", 1), ("O", 1)], False),
])
def test_fixtures_against_oracle(formula, expected):
    species = _species(formula)
    assert compositional_validity(species) is expected
    assert oracle(species) is expected


def test_reduction_by_gcd():
    assert compositional_validity(_species([("Na", 4), ("Cl", 4)]))


def test_budget_exhaustion_counts_as_invalid():
    species = _species([("Na", 1), ("Cl", 1)])
    assert compositional_validity(species, max_combinations=1) is False


common = st.sampled_from([1, 3, 6, 7, 8, 9, 11, 12, 13, 14, 15, 16, 17, 19, 20, 22, 26, 29, 34, 35, 53, 56])


@given(st.lists(st.tuples(common, st.integers(1, 4)), min_size=1, max_size=3))
def test_matches_oracle_on_random_compositions(parts):
    species = [z for z, n in parts for _ in range(n)]
    assert compositional_validity(species) == oracle(species)
