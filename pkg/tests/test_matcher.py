import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crystaldit.errors import DegenerateLattice
from crystaldit.evaluate import uniqueness_novelty
from crystaldit.fixtures import make_synthetic_dataset
from crystaldit.matcher import MatcherTolerances, structures_match
from crystaldit.tensorize import CrystalStructure

from matcher_fixtures import jittered, planted_set, shifted_permuted

FIXTURES = make_synthetic_dataset(50, seed=11)


def test_tolerances():
    tol = MatcherTolerances()
    assert (tol.ltol, tol.stol, tol.angle_tol) == (0.2, 0.3, 5.0)
    with pytest.raises(ValueError):
        MatcherTolerances(ltol=0)


def test_spec_examples(nacl):
    rng = np.random.default_rng(0)
    assert structures_match(nacl, nacl)
    moved = shifted_permuted(nacl, np.array([0.3, 0.3, 0.3]), rng)
    assert structures_match(nacl, moved)
    big = CrystalStructure(nacl.lattice * 1.5, nacl.species, nacl.frac_coords)
    assert not structures_match(nacl, big)


@pytest.mark.parametrize("k", range(50))
def test_invariants_on_fixtures(k):
    s = FIXTURES[k]
    rng = np.random.default_rng(k)
    assert structures_match(s, s)
    permuted = shifted_permuted(s, np.zeros(3), rng)
    assert structures_match(s, permuted) and structures_match(permuted, s)
    moved = shifted_permuted(s, rng.random(3), rng)
    assert structures_match(s, moved) and structures_match(moved, s)


def test_composition_and_count_must_agree(nacl):
    other = CrystalStructure(nacl.lattice, [11] * 4 + [9] * 4, nacl.frac_coords)
    assert not structures_match(nacl, other)
    half = CrystalStructure(nacl.lattice, [11, 17], [[0, 0, 0], [.5, .5, .5]])
    assert not structures_match(nacl, half)


def test_site_tolerance(nacl):
    frac = nacl.frac_coords.copy()
    # threshold is 0.3 * (V/N)^(1/3) = 0.3 * 2.82 A; a 0.5 A move passes, 1.2 A does not
    frac[0] = [0.5 / 5.64, 0, 0]
    assert structures_match(nacl, CrystalStructure(nacl.lattice, nacl.species, frac))
    frac[0] = [0.25, 0.25, 0]
    assert not structures_match(nacl, CrystalStructure(nacl.lattice, nacl.species, frac))


def test_angle_tolerance():
    from crystaldit.lattice import from_params
    a = CrystalStructure(from_params(4, 4, 4, 90, 90, 90), [11, 17], [[0, 0, 0], [.5, .5, .5]])
    b = CrystalStructure(from_params(4, 4, 4, 90, 90, 96), [11, 17], [[0, 0, 0], [.5, .5, .5]])
    c = CrystalStructure(from_params(4, 4, 4, 90, 90, 94), [11, 17], [[0, 0, 0], [.5, .5, .5]])
    assert not structures_match(a, b)
    assert structures_match(a, c)


def test_degenerate_lattice():
    flat = CrystalStructure([[1, 0, 0], [0, 1, 0], [0, 0, 0]], [11, 17], [[0, 0, 0], [.5, .5, .5]])
    with pytest.raises(DegenerateLattice):
        structures_match(flat, flat)


@settings(max_examples=40)
@given(st.integers(0, 49), st.integers(0, 49), st.integers(0, 2**31))
def test_symmetry(i, j, seed):
    rng = np.random.default_rng(seed)
    a = FIXTURES[i]
    b = jittered(FIXTURES[j], rng, 0.05)
    assert structures_match(a, b) == structures_match(b, a)


def brute_force_flags(gen, train, tol=MatcherTolerances()):
    """O(n^2) flags with no grouping by chemical system."""
    flags = []
    for i, s in enumerate(gen):
        if len(set(s.species)) < 2:
            flags.append((True, False, False))
            continue
        unique = not any(structures_match(s, o, tol) for j, o in enumerate(gen)
                         if j != i and len(set(o.species)) >= 2)
        novel = not any(structures_match(s, r, tol) for r in train)
        flags.append((False, unique, novel))
    return flags


def test_grouped_flags_equal_brute_force():
    gen = planted_set(50, seed=0)
    train = planted_set(50, seed=1)[:25] + gen[:10]
    grouped = [(f.excluded, f.unique, f.novel) for f in uniqueness_novelty(gen, train)]
    assert grouped == brute_force_flags(gen, train)
    # the planted near-copies make the test meaningful
    assert sum(not u for e, u, _ in grouped if not e) >= 10
    assert sum(not n for e, _, n in grouped if not e) >= 10


def test_uniqueness_examples(nacl):
    fe = CrystalStructure(np.eye(3) * 2.87, [26, 26], [[0, 0, 0], [.5, .5, .5]])
    flags = uniqueness_novelty([nacl, nacl, fe], [])
    assert [(f.unique, f.novel) for f in flags[:2]] == [(False, True), (False, True)]
    assert flags[2].excluded and not flags[2].unique and not flags[2].novel
    assert not uniqueness_novelty([nacl], [nacl])[0].novel
