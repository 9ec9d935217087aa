import numpy as np
import pytest
from hypothesis import given, strategies as st

from crystaldit.cif import parse_cif, read_cif, write_cif
from crystaldit.errors import ParseError, UnknownElement
from crystaldit.lattice import from_params, lattice_params
from crystaldit.tensorize import CrystalStructure

MINIMAL = """data_test
_cell_length_a 3.0
_cell_length_b 3.0
_cell_length_c 3.0
_cell_angle_alpha 90
_cell_angle_beta 90
_cell_angle_gamma 90
loop_
_atom_site_type_symbol
_atom_site_fract_x
_atom_site_fract_y
_atom_site_fract_z
Fe 0 0 0
"""


def test_minimal_cif():
    s = read_cif(MINIMAL)
    assert s.species == (26,)
    assert np.allclose(s.lattice, np.eye(3) * 3)


def test_unknown_symbol():
    with pytest.raises(UnknownElement):
        read_cif(MINIMAL.replace("Fe 0 0 0", "Xx 0 0 0"))


def test_uncertainties_labels_and_identity_symops():
    text = MINIMAL.replace("_cell_length_a 3.0", "_cell_length_a 3.0(2)")
    text = text.replace("_atom_site_type_symbol", "_atom_site_label").replace("Fe 0 0 0", "Fe1 0.5 0.5 0.5")
    text += "loop_\n_symmetry_equiv_pos_as_xyz\n'x, y, z'\n"
    s = read_cif(text)
    assert s.species == (26,) and np.allclose(s.frac_coords, 0.5)


@pytest.mark.parametrize("edit, field", [
    (("_cell_length_b 3.0\n", ""), "_cell_length_b"),
    (("_cell_angle_beta 90", "_cell_angle_beta ninety"), "_cell_angle_beta"),
])
def test_parse_errors_carry_context(edit, field):
    with pytest.raises(ParseError) as err:
        parse_cif(MINIMAL.replace(*edit))
    assert err.value.field == field


def test_rejects_unsupported_features():
    with pytest.raises(ParseError):
        parse_cif(MINIMAL + "loop_\n_symmetry_equiv_pos_as_xyz\n'x, y, z'\n'-x, -y, -z'\n")
    with pytest.raises(ParseError):
        parse_cif(MINIMAL + "data_second\n")
    occ = MINIMAL.replace("_atom_site_fract_z\n", "_atom_site_fract_z\n_atom_site_occupancy\n")
    with pytest.raises(ParseError):
        parse_cif(occ.replace("Fe 0 0 0", "Fe 0 0 0 0.5"))


def test_nan_values_parse_without_structure():
    parsed = parse_cif(MINIMAL.replace("_cell_length_a 3.0", "_cell_length_a nan"))
    assert np.isnan(parsed.lengths[0])


def test_four_site_round_trip():
    lat = from_params(3.9, 4.1, 5.2, 85.0, 95.0, 110.0)
    s = CrystalStructure(lat, [8, 26, 26, 3],
                         [[0.1, 0.2, 0.3], [0.5, 0.5, 0.5], [0.9, 0.05, 0.7], [0.333333, 0.666667, 0.0]])
    back = read_cif(write_cif(s))
    assert back.species == s.species
    assert np.allclose(lattice_params(back.lattice)[:3], lattice_params(s.lattice)[:3], atol=1e-6)
    assert np.allclose(lattice_params(back.lattice)[3:], lattice_params(s.lattice)[3:], atol=1e-4)
    assert np.allclose(back.frac_coords, s.frac_coords, atol=1e-6)


def test_writer_format():
    s = CrystalStructure(np.eye(3) * 4, [11, 17], [[0, 0, 0], [0.9999999, 0.5, 0.5]])
    text = write_cif(s, ["seed: 3"])
    lines = text.splitlines()
    assert lines[0] == "# seed: 3"
    assert lines[1] == "data_Na1Cl1"
    assert "_cell_length_a 4.000000" in lines
    assert lines[-1] == "Cl 0.000000 0.500000 0.500000"


@given(st.lists(st.tuples(st.floats(0, 0.999999), st.floats(0, 0.999999), st.floats(0, 0.999999)),
                min_size=1, max_size=6))
def test_written_coordinates_stay_in_unit_interval(coords):
    s = CrystalStructure(np.eye(3) * 5, [6] * len(coords), coords)
    back = read_cif(write_cif(s))
    assert np.all((back.frac_coords >= 0) & (back.frac_coords < 1))
    diff = back.frac_coords - s.frac_coords
    assert np.allclose(diff - np.round(diff), 0, atol=1e-6)
