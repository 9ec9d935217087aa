"""Conversion between symbolic crystals and fixed-size model tensors.

A crystal becomes a normalized 3x3 lattice plus a 20-row atom matrix.  In
2D mode each row is ``[r_norm, c_norm, x, y, z]``; in 1D mode it is
``[z_norm, x, y, z]``.  Unused rows are filled with -1 in every column.
"""

import csv
import sys
from collections import Counter
from dataclasses import dataclass, field
from math import gcd
from functools import reduce
from pathlib import Path

import numpy as np

from . import chem
from .chem import DecoderConfig
from .cif import parse_cif, write_cif
from .errors import (
    CrystalDiTError,
    DatasetError,
    EmptyDataset,
    NonFinite,
    TooManyAtoms,
    UnencodableSpecies,
)
from .lattice import L_MAX

MAX_ATOMS = 20
NUM_FEATURES = {"2d": 5, "1d": 4}


def wrap_unit(frac):
    """Fractional coordinates mod 1, guaranteed inside [0, 1)."""
    frac = np.mod(frac, 1.0)
    # np.mod of a tiny negative rounds up to exactly 1.0
    return np.where(frac >= 1.0, 0.0, frac)


@dataclass(frozen=True, eq=False)
class CrystalStructure:
    lattice: np.ndarray
    species: tuple
    frac_coords: np.ndarray

    def __post_init__(self):
        lattice = np.array(self.lattice, dtype=np.float64)
        frac = np.array(self.frac_coords, dtype=np.float64).reshape(-1, 3)
        species = tuple(int(z) for z in self.species)
        if lattice.shape != (3, 3):
            raise ValueError(f"lattice must be 3x3, got {lattice.shape}")
        if len(species) == 0 or len(species) != len(frac):
            raise ValueError(f"{len(species)} species for {len(frac)} sites")
        if not (np.all(np.isfinite(frac)) and np.all(np.isfinite(lattice))):
            raise NonFinite("structure has non-finite lattice or coordinates")
        lattice.flags.writeable = False
        frac.flags.writeable = False
        object.__setattr__(self, "lattice", lattice)
        object.__setattr__(self, "frac_coords", frac)
        object.__setattr__(self, "species", species)

    @property
    def num_atoms(self):
        return len(self.species)

    @property
    def composition(self):
        return Counter(self.species)

    @property
    def reduced_composition(self):
        counts = self.composition
        div = reduce(gcd, counts.values())
        return tuple(sorted((z, n // div) for z, n in counts.items()))

    @property
    def chemical_system(self):
        return "-".join(sorted(chem.symbol(z) for z in set(self.species)))

    @property
    def formula(self):
        return " ".join(f"{chem.symbol(z)}{n}" for z, n in sorted(self.composition.items()))

    def __repr__(self):
        return f"CrystalStructure({self.formula}, volume={abs(np.linalg.det(self.lattice)):.3f})"


@dataclass(frozen=True, eq=False)
class CrystalTensor:
    lattice_norm: np.ndarray
    atoms: np.ndarray
    mode: str = "2d"

    def __post_init__(self):
        if self.mode not in NUM_FEATURES:
            raise ValueError(f"mode must be '2d' or '1d', got {self.mode!r}")


def _check_mode(mode):
    if mode not in NUM_FEATURES:
        raise ValueError(f"mode must be '2d' or '1d', got {mode!r}")


def to_tensor(structure, mode="2d"):
    _check_mode(mode)
    n = structure.num_atoms
    if n > MAX_ATOMS:
        raise TooManyAtoms(f"{n} atoms exceeds the {MAX_ATOMS}-row limit")
    atoms = np.full((MAX_ATOMS, NUM_FEATURES[mode]), -1.0)
    limit = chem.MAX_Z if mode == "2d" else chem.MAX_Z_1D
    for i, z in enumerate(structure.species):
        if not 1 <= z <= limit:
            raise UnencodableSpecies(f"Z={z} cannot be encoded in {mode} mode (1..{limit})")
        if mode == "2d":
            atoms[i, :2] = chem.encode_2d(z)
        else:
            atoms[i, 0] = chem.encode_1d(z)
    atoms[:n, -3:] = wrap_unit(structure.frac_coords)
    return CrystalTensor(structure.lattice / L_MAX, atoms, mode)


def decode_atoms(atoms, mode="2d", cfg=DecoderConfig()):
    """Atomic numbers for every row of an atom matrix (..., 20, F); 0 means null."""
    atoms = np.asarray(atoms, dtype=np.float64)
    if mode == "2d":
        z = chem.decode_2d_many(atoms[..., :2], cfg)
    else:
        z = chem.decode_1d_many(atoms[..., 0])
    padding = np.all(atoms == -1.0, axis=-1)
    return np.where(padding, 0, z)


def from_arrays(lattice_norm, atoms, mode="2d", cfg=DecoderConfig()):
    """Decode one sample; returns ``(structure_or_None, null_count)``."""
    lattice_norm = np.asarray(lattice_norm, dtype=np.float64)
    atoms = np.asarray(atoms, dtype=np.float64)
    if not (np.all(np.isfinite(lattice_norm)) and np.all(np.isfinite(atoms))):
        raise NonFinite("tensor has non-finite entries")
    z = decode_atoms(atoms, mode, cfg)
    keep = z > 0
    null_count = int(np.sum(~keep))
    if not keep.any():
        return None, null_count
    frac = wrap_unit(atoms[keep, -3:])
    return CrystalStructure(lattice_norm * L_MAX, z[keep].tolist(), frac), null_count


def from_tensor(tensor, cfg=DecoderConfig()):
    """Decode a tensor back to a structure, or ``None`` when every row is null."""
    return from_arrays(tensor.lattice_norm, tensor.atoms, tensor.mode, cfg)[0]


def stack(tensors):
    """Batch arrays ``(lattice (B,3,3), atoms (B,20,F))`` from a list of tensors."""
    return (np.stack([t.lattice_norm for t in tensors]),
            np.stack([t.atoms for t in tensors]))


@dataclass
class IngestReport:
    source: str
    n_records: int = 0
    n_loaded: int = 0
    skipped: Counter = field(default_factory=Counter)

    def as_dict(self):
        return {
            "source": self.source,
            "n_records": self.n_records,
            "n_loaded": self.n_loaded,
            "skipped": dict(sorted(self.skipped.items())),
        }


def _records(path):
    """(record id, CIF text) pairs from a CIF directory or a table with a ``cif`` column."""
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"{path} does not exist")
    if path.is_dir():
        for f in sorted(path.glob("*.cif")):
            yield f.name, f.read_text()
        return
    csv.field_size_limit(sys.maxsize)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "cif" not in reader.fieldnames:
            raise DatasetError(f"{path}: table needs a 'cif' column")
        id_col = next((c for c in ("material_id", "id") if c in reader.fieldnames), None)
        for k, row in enumerate(reader):
            yield (row[id_col] if id_col else str(k)), row["cif"]


def load_structures(path, mode=None):
    """Parse every record; when ``mode`` is given, keep only encodable structures.

    Returns ``(ids, structures, report)``.
    """
    if mode is not None:
        _check_mode(mode)
    report = IngestReport(str(path))
    ids, structures = [], []
    for rid, text in _records(path):
        report.n_records += 1
        try:
            s = parse_cif(text).to_structure()
            if mode is not None:
                to_tensor(s, mode)
        except CrystalDiTError as err:
            report.skipped[type(err).__name__] += 1
            continue
        ids.append(rid)
        structures.append(s)
    report.n_loaded = len(structures)
    if report.n_records == 0:
        raise EmptyDataset(f"{path} contains no CIF records")
    if not structures:
        raise EmptyDataset(f"{path}: none of {report.n_records} records could be used")
    return ids, structures, report


def load_dataset(path, mode="2d"):
    """Tensorize a dataset; returns ``(tensors, report)``."""
    _, structures, report = load_structures(path, mode)
    return [to_tensor(s, mode) for s in structures], report


def write_cif_dir(structures, directory, comments=(), prefix="structure"):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    width = max(5, len(str(len(structures))))
    for k, s in enumerate(structures):
        (directory / f"{prefix}_{k:0{width}d}.cif").write_text(write_cif(s, comments))


def write_table(structures, path, ids=None):
    """Write a delimited table with ``material_id`` and ``cif`` columns."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["material_id", "cif"])
        for k, s in enumerate(structures):
            w.writerow([ids[k] if ids else f"syn-{k}", write_cif(s)])
