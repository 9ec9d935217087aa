import numpy as np
import pytest
from hypothesis import given, strategies as st

from crystaldit.chem import MAX_Z, MAX_Z_1D
from crystaldit.errors import DatasetError, EmptyDataset, TooManyAtoms, UnencodableSpecies
from crystaldit.lattice import L_MAX
from crystaldit.tensorize import (CrystalStructure, from_arrays, from_tensor, load_dataset,
                                  load_structures, to_tensor, wrap_unit, write_cif_dir, write_table)
from crystaldit.fixtures import make_synthetic_dataset


def _structure(species, seed=0):
    rng = np.random.default_rng(seed)
    return CrystalStructure(np.diag([4.0, 5.0, 6.0]), species, rng.random((len(species), 3)))


def test_single_h_tensor():
    s = CrystalStructure(np.eye(3) * 5, [1], [[0.1, 0.2, 0.3]])
    t = to_tensor(s)
    assert t.atoms.shape == (20, 5) and t.lattice_norm.shape == (3, 3)
    assert np.allclose(t.atoms[0], [-5 / 7, -8 / 9, 0.1, 0.2, 0.3])
    assert np.all(t.atoms[1:] == -1.0)
    assert np.allclose(t.lattice_norm, np.eye(3) * 5 / L_MAX)


def test_atom_count_limits():
    full = to_tensor(_structure([6] * 20))
    assert not np.any(np.all(full.atoms == -1.0, axis=1))
    with pytest.raises(TooManyAtoms):
        to_tensor(_structure([6] * 21))


def test_species_range_per_mode():
    with pytest.raises(UnencodableSpecies):
        to_tensor(_structure([95]), "1d")
    to_tensor(_structure([103]), "2d")
    with pytest.raises(UnencodableSpecies):
        to_tensor(_structure([104]), "2d")


def test_row_order_is_preserved():
    t = to_tensor(_structure([26, 8, 1]))
    from crystaldit.chem import encode_2d
    assert [tuple(r[:2]) for r in t.atoms[:3]] == [encode_2d(26), encode_2d(8), encode_2d(1)]


def test_all_null_is_empty():
    atoms = np.full((20, 5), -1.0)
    assert from_arrays(np.eye(3) * 0.1, atoms)[0] is None
    assert from_arrays(np.eye(3) * 0.1, atoms)[1] == 20


def test_coordinates_wrap():
    s = CrystalStructure(np.eye(3) * 4, [6], [[1.25, -0.25, 0.5]])
    assert np.allclose(to_tensor(s).atoms[0, 2:], [0.25, 0.75, 0.5])
    assert np.all(wrap_unit(np.array([-1e-18, 1.0, 2.5])) < 1.0)


@given(st.lists(st.integers(1, MAX_Z), min_size=1, max_size=20), st.integers(0, 1000))
def test_round_trip_2d(species, seed):
    s = _structure(species, seed)
    back = from_tensor(to_tensor(s, "2d"))
    assert back.species == s.species
    assert np.allclose(back.frac_coords, s.frac_coords, atol=1e-9)
    assert np.allclose(back.lattice, s.lattice, atol=1e-12)


@given(st.lists(st.integers(1, MAX_Z_1D), min_size=1, max_size=20), st.integers(0, 1000))
def test_round_trip_1d(species, seed):
    s = _structure(species, seed)
    t = to_tensor(s, "1d")
    assert t.atoms.shape == (20, 4)
    back = from_tensor(t)
    assert back.species == s.species
    assert np.allclose(back.frac_coords, s.frac_coords, atol=1e-9)


def test_padding_rows_never_emit_atoms():
    # a padding row sits exactly on the null anchor; nudging one entry makes it a real row
    atoms = np.full((20, 5), -1.0)
    atoms[0] = [-5 / 7, -8 / 9, 0.1, 0.1, 0.1]
    s, nulls = from_arrays(np.eye(3) * 0.1, atoms)
    assert s.species == (1,) and nulls == 19


def test_load_cif_directory(tmp_path):
    structures = make_synthetic_dataset(3, seed=1)
    write_cif_dir(structures, tmp_path / "cifs")
    tensors, report = load_dataset(tmp_path / "cifs", "2d")
    assert len(tensors) == 3 and report.n_loaded == 3 and not report.skipped


def test_load_table_skips_oversized(tmp_path):
    structures = make_synthetic_dataset(2, seed=1) + [_structure([6] * 25)]
    write_table(structures, tmp_path / "data.csv")
    tensors, report = load_dataset(tmp_path / "data.csv", "2d")
    assert len(tensors) == 2
    assert report.as_dict()["skipped"] == {"TooManyAtoms": 1}
    ids, _, _ = load_structures(tmp_path / "data.csv")
    assert ids == ["syn-0", "syn-1", "syn-2"]


def test_empty_and_missing_sources(tmp_path):
    (tmp_path / "empty").mkdir()
    with pytest.raises(EmptyDataset):
        load_dataset(tmp_path / "empty")
    with pytest.raises(DatasetError):
        load_dataset(tmp_path / "absent")
    (tmp_path / "t.csv").write_text("a,b\n1,2\n")
    with pytest.raises(DatasetError):
        load_dataset(tmp_path / "t.csv")


def test_structure_is_immutable():
    s = _structure([6, 8])
    with pytest.raises(ValueError):
        s.frac_coords[0, 0] = 0.5
    with pytest.raises(ValueError):
        CrystalStructure(np.eye(3), [6, 8], [[0, 0, 0]])


def test_structure_properties():
    s = CrystalStructure(np.eye(3) * 4, [11, 17, 11, 17], np.zeros((4, 3)))
    assert s.reduced_composition == ((11, 1), (17, 1))
    assert s.chemical_system == "Cl-Na"
    assert s.num_atoms == 4
