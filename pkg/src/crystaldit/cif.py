"""Minimal CIF reader and writer.

Only the subset needed for P1 cells is understood: the six
``_cell_length_*``/``_cell_angle_*`` items and a ``loop_`` carrying
``_atom_site_type_symbol`` (or ``_atom_site_label``) with
``_atom_site_fract_x/y/z``.  Symmetry loops are accepted only when they
contain nothing but the identity operation.
"""

import math
import re
import shlex
from dataclasses import dataclass

import numpy as np

from .chem import atomic_number, symbol
from .errors import ParseError
from .lattice import from_params, lattice_params

CELL_KEYS = (
    "_cell_length_a", "_cell_length_b", "_cell_length_c",
    "_cell_angle_alpha", "_cell_angle_beta", "_cell_angle_gamma",
)
SYMOP_KEYS = ("_symmetry_equiv_pos_as_xyz", "_space_group_symop_operation_xyz")
_NUMBER = re.compile(r"^([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)(?:\(\d+\))?$")
_SYMBOL = re.compile(r"^([A-Z][a-z]?)")


@dataclass
class ParsedCIF:
    """Raw contents of a CIF before any geometric validation."""

    lengths: tuple
    angles: tuple
    species: list
    frac_coords: np.ndarray

    def to_structure(self):
        from .tensorize import CrystalStructure

        lattice = from_params(*self.lengths, *self.angles)
        return CrystalStructure(lattice, self.species, self.frac_coords)


def _number(token, line, key):
    low = token.lower()
    if low in ("nan", "inf", "+inf", "-inf", "infinity", "-infinity"):
        return float(low)
    m = _NUMBER.match(token)
    if not m:
        raise ParseError(f"expected a number, got {token!r}", line, key)
    return float(m.group(1))


def _tokens(text, line):
    try:
        return shlex.split(text, posix=True)
    except ValueError:
        raise ParseError("unbalanced quotes", line) from None


def _scan(text):
    """Yield ('item', key, value, line) and ('loop', headers, rows, line) records."""
    lines = text.splitlines()
    i = 0
    blocks = 0
    records = []
    in_text_field = False
    while i < len(lines):
        raw = lines[i]
        lineno = i + 1
        i += 1
        if raw.startswith(";"):
            in_text_field = not in_text_field
            continue
        if in_text_field:
            continue
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.lower().startswith("data_"):
            blocks += 1
            if blocks > 1:
                raise ParseError("multiple data blocks are not supported", lineno)
            continue
        if stripped.lower() == "loop_":
            headers = []
            while i < len(lines) and lines[i].strip().startswith("_"):
                headers.append(lines[i].strip().split()[0].lower())
                i += 1
            values = []
            start = i + 1
            while i < len(lines):
                s = lines[i].strip()
                if s.startswith(("_", "#")) or s.lower().startswith(("loop_", "data_")):
                    break
                if s:
                    values.extend(_tokens(s, i + 1))
                i += 1
            if not headers:
                raise ParseError("loop_ without headers", lineno)
            if len(values) % len(headers):
                raise ParseError(
                    f"loop has {len(values)} values for {len(headers)} columns", start)
            rows = [values[k:k + len(headers)] for k in range(0, len(values), len(headers))]
            records.append(("loop", headers, rows, lineno))
            continue
        if stripped.startswith("_"):
            parts = _tokens(stripped, lineno)
            key = parts[0].lower()
            if len(parts) > 1:
                value = " ".join(parts[1:])
            else:
                # value on the following line
                value = None
                while i < len(lines) and not lines[i].strip():
                    i += 1
                if i < len(lines) and not lines[i].strip().startswith(("_", ";")):
                    value = " ".join(_tokens(lines[i].strip(), i + 1))
                    i += 1
            records.append(("item", key, value, lineno))
            continue
        raise ParseError(f"unexpected content {stripped[:40]!r}", lineno)
    return records


def _is_identity(op):
    return op.replace(" ", "").lower() == "x,y,z"


def parse_cif(text):
    """Parse CIF text into a :class:`ParsedCIF` without validating geometry.

    Non-finite numbers are kept so that downstream filters can reject them
    with a specific reason.
    """
    cell = {}
    sites = None
    for rec in _scan(text):
        if rec[0] == "item":
            _, key, value, line = rec
            if key in CELL_KEYS:
                if value is None:
                    raise ParseError("missing value", line, key)
                cell[key] = _number(value, line, key)
            elif key in SYMOP_KEYS and value is not None and not _is_identity(value):
                raise ParseError("symmetry operations are not supported", line, key)
            continue
        _, headers, rows, line = rec
        for key in SYMOP_KEYS:
            if key in headers:
                col = headers.index(key)
                if any(not _is_identity(r[col]) for r in rows):
                    raise ParseError("symmetry operations are not supported", line, key)
        if "_atom_site_fract_x" in headers:
            if sites is not None:
                raise ParseError("more than one atom-site loop", line)
            sites = (headers, rows, line)
    missing = [k for k in CELL_KEYS if k not in cell]
    if missing:
        raise ParseError("missing cell parameter", None, missing[0])
    if sites is None:
        raise ParseError("no _atom_site loop with fractional coordinates")
    headers, rows, line = sites
    for key in ("_atom_site_fract_y", "_atom_site_fract_z"):
        if key not in headers:
            raise ParseError("missing column", line, key)
    if "_atom_site_type_symbol" in headers:
        sym_col = headers.index("_atom_site_type_symbol")
    elif "_atom_site_label" in headers:
        sym_col = headers.index("_atom_site_label")
    else:
        raise ParseError("missing column", line, "_atom_site_type_symbol")
    xyz_cols = [headers.index(f"_atom_site_fract_{ax}") for ax in "xyz"]
    occ_col = headers.index("_atom_site_occupancy") if "_atom_site_occupancy" in headers else None
    species, coords = [], []
    for row in rows:
        m = _SYMBOL.match(row[sym_col])
        if not m:
            raise ParseError(f"cannot read element from {row[sym_col]!r}", line, "_atom_site_type_symbol")
        species.append(atomic_number(m.group(1)))
        coords.append([_number(row[c], line, headers[c]) for c in xyz_cols])
        if occ_col is not None:
            occ = _number(row[occ_col], line, "_atom_site_occupancy")
            if not math.isclose(occ, 1.0, abs_tol=1e-6):
                raise ParseError("partial occupancy is not supported", line, "_atom_site_occupancy")
    if not species:
        raise ParseError("atom-site loop is empty", line)
    return ParsedCIF(
        lengths=tuple(cell[k] for k in CELL_KEYS[:3]),
        angles=tuple(cell[k] for k in CELL_KEYS[3:]),
        species=species,
        frac_coords=np.array(coords, dtype=np.float64),
    )


def read_cif(text):
    return parse_cif(text).to_structure()


def _frac_text(v):
    # rounding can carry 0.9999996 up to 1; keep printed coordinates in [0, 1)
    v = round(float(v), 6) % 1.0
    return f"{v + 0.0:.6f}"


def write_cif(structure, comments=()):
    """Serialize a structure; ``comments`` become leading ``#`` lines."""
    params = lattice_params(structure.lattice)
    out = [f"# {c}" for c in comments]
    out.append(f"data_{structure.formula.replace(' ', '')}")
    for key, value in zip(CELL_KEYS, params):
        out.append(f"{key} {value:.6f}")
    out += [
        "loop_",
        "_atom_site_type_symbol",
        "_atom_site_fract_x",
        "_atom_site_fract_y",
        "_atom_site_fract_z",
    ]
    for z, xyz in zip(structure.species, structure.frac_coords):
        out.append(" ".join([symbol(int(z))] + [_frac_text(v) for v in xyz]))
    return "\n".join(out) + "\n"
