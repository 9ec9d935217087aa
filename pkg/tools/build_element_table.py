"""Regenerate ``src/crystaldit/data/elements.csv``.

Reads the ``periodic_table.json.gz`` file shipped inside a pymatgen wheel
(pymatgen is not a runtime dependency) and writes one record per element
for Z = 1..103.  Period and group are computed here, not taken from the
source file, so that the f-block convention is ours.

Usage::

    python tools/build_element_table.py /path/to/periodic_table.json.gz
"""

import csv
import gzip
import json
import sys
from fractions import Fraction
from pathlib import Path

NON_METALS = {
    "H", "He", "B", "C", "N", "O", "F", "Ne", "Si", "P", "S", "Cl", "Ar",
    "Ge", "As", "Se", "Br", "Kr", "Sb", "Te", "I", "Xe", "Po", "At", "Rn",
}
PERIOD_ENDS = (2, 10, 18, 36, 54, 86, 118)


def period_of(z):
    for period, end in enumerate(PERIOD_ENDS, start=1):
        if z <= end:
            return period
    raise ValueError(z)


def group_of(z):
    if z == 1:
        return 1
    if z == 2:
        return 18
    p = period_of(z)
    start = PERIOD_ENDS[p - 2] + 1
    k = z - start
    if p in (2, 3):
        return k + 1 if k < 2 else k + 11
    if p in (4, 5):
        return k + 1
    if k < 2:
        return k + 1
    first_f = 57 if p == 6 else 89
    if first_f <= z <= first_f + 14:
        return 3 + Fraction(z - first_f, 15)
    return z - (68 if p == 6 else 100)


def main(src, dst):
    table = json.load(gzip.open(src))
    by_z = {rec["Atomic no"]: (sym, rec) for sym, rec in table.items() if "Atomic no" in rec and sym not in ("D", "T")}
    with open(dst, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["atomic_number", "symbol", "period", "group", "atomic_mass",
                    "pauling_electronegativity", "oxidation_states", "is_metal"])
        for z in range(1, 104):
            sym, rec = by_z[z]
            g = group_of(z)
            x = rec.get("X")
            ox = rec.get("Oxidation states") or []
            w.writerow([
                z, sym, period_of(z),
                g,
                rec["Atomic mass"],
                "" if x is None or x != x else x,
                " ".join(str(o) for o in ox),
                int(sym not in NON_METALS),
            ])


if __name__ == "__main__":
    out = Path(__file__).resolve().parents[1] / "src" / "crystaldit" / "data" / "elements.csv"
    main(sys.argv[1], out)
