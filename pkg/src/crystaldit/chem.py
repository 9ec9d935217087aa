"""Periodic-table data, atomic encodings and probabilistic decoding.

Atoms are encoded either by their (period, group) position, normalized to
[-1, 1] on each axis, or by a single normalized atomic number.  The null
atom (Z = 0) marks an empty row and sits at -1 on every axis.

Decoding a continuous (period, group) prediction assigns every candidate
element a rectangular responsibility region and scores it with the mass a
Gaussian centred on the prediction puts inside that region.
"""

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from typing import NamedTuple

import numpy as np
from scipy.special import log_ndtr

from .errors import NonFinite, OutOfRange, UnknownElement

MAX_Z = 103
MAX_Z_1D = 94
NUM_PERIODS = 7
NUM_GROUPS = 18

# Parsing needs symbols past the tabulated range so that out-of-range
# candidates can be recognised and rejected instead of failing to parse.
_EXTRA_SYMBOLS = (
    "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc",
    "Lv", "Ts", "Og",
)


@dataclass(frozen=True)
class ElementDescriptor:
    atomic_number: int
    symbol: str
    period: int
    group: float
    atomic_mass: float
    pauling_electronegativity: float | None
    oxidation_states: tuple[int, ...]
    is_metal: bool


class AtomicEncoding2D(NamedTuple):
    r_norm: float
    c_norm: float


@dataclass(frozen=True)
class DecoderConfig:
    sigma: float = 0.1
    delta_r: float = field(default=1 / NUM_PERIODS, init=False)
    delta_c: float = field(default=1 / NUM_GROUPS, init=False)

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise OutOfRange(f"decoder sigma must be positive, got {self.sigma}")


@lru_cache(maxsize=None)
def _table():
    rows = {}
    text = resources.files("crystaldit").joinpath("data/elements.csv").read_text()
    for rec in csv.DictReader(text.splitlines()):
        z = int(rec["atomic_number"])
        chi = rec["pauling_electronegativity"]
        rows[z] = ElementDescriptor(
            atomic_number=z,
            symbol=rec["symbol"],
            period=int(rec["period"]),
            group=float(Fraction(rec["group"])),
            atomic_mass=float(rec["atomic_mass"]),
            pauling_electronegativity=float(chi) if chi else None,
            oxidation_states=tuple(int(s) for s in rec["oxidation_states"].split()),
            is_metal=rec["is_metal"] == "1",
        )
    return rows


@lru_cache(maxsize=None)
def _symbol_index():
    index = {d.symbol: z for z, d in _table().items()}
    for offset, sym in enumerate(_EXTRA_SYMBOLS):
        index[sym] = MAX_Z + 1 + offset
    return index


def element_info(z):
    """Return the tabulated descriptor for atomic number ``z`` (1..103)."""
    if isinstance(z, bool) or int(z) != z or not 1 <= z <= MAX_Z:
        raise OutOfRange(f"atomic number {z} outside 1..{MAX_Z}")
    return _table()[int(z)]


def atomic_number(symbol):
    """Map an element symbol to Z, accepting symbols up to Og (Z = 118)."""
    try:
        return _symbol_index()[symbol]
    except KeyError:
        raise UnknownElement(f"unknown element symbol {symbol!r}") from None


def symbol(z):
    if 1 <= z <= MAX_Z:
        return _table()[z].symbol
    if MAX_Z < z <= MAX_Z + len(_EXTRA_SYMBOLS):
        return _EXTRA_SYMBOLS[z - MAX_Z - 1]
    raise OutOfRange(f"no symbol for atomic number {z}")


def encode_2d(z):
    """Normalized (period, group) coordinates of ``z``; Z = 0 is the null atom."""
    if z == 0:
        return AtomicEncoding2D(-1.0, -1.0)
    el = element_info(z)
    return AtomicEncoding2D(2 * el.period / NUM_PERIODS - 1, 2 * el.group / NUM_GROUPS - 1)


def encode_1d(z):
    """Normalized atomic number ``2z/94 - 1``; Z = 0 maps to -1."""
    if isinstance(z, bool) or int(z) != z or not 0 <= z <= MAX_Z_1D:
        raise OutOfRange(f"atomic number {z} outside 0..{MAX_Z_1D} for 1D encoding")
    return 2 * int(z) / MAX_Z_1D - 1


@lru_cache(maxsize=None)
def _anchors_2d():
    """(104, 2) array of anchors ordered by Z, null first."""
    return np.array([encode_2d(z) for z in range(MAX_Z + 1)], dtype=np.float64)


@lru_cache(maxsize=None)
def _anchors_1d():
    return np.array([encode_1d(z) for z in range(MAX_Z_1D + 1)], dtype=np.float64)


def responsibility_bounds(anchor, delta):
    """Half-open cell ``(lower, upper]`` owned by an anchor on one axis."""
    lower = -math.inf if anchor == -1.0 else anchor - delta
    upper = math.inf if anchor == 1.0 else anchor + delta
    return lower, upper


def axis_cells(num):
    """Cells of the integer grid ``0..num`` on one normalized axis.

    These tile the real line, so the Gaussian mass over them sums to one.
    """
    delta = 1 / num
    return [responsibility_bounds(2 * k / num - 1, delta) for k in range(num + 1)]


def _log_interval_mass(mu, lower, upper, sigma):
    """log of the N(mu, sigma) mass on (lower, upper], stable in both tails."""
    a = (np.asarray(lower) - mu) / sigma
    b = (np.asarray(upper) - mu) / sigma
    # reflect so both standardized bounds sit in the lower tail
    flip = a > 0
    a, b = np.where(flip, -b, a), np.where(flip, -a, b)
    lb, la = log_ndtr(b), log_ndtr(a)
    with np.errstate(divide="ignore"):
        return lb + np.log1p(-np.exp(la - lb))


def interval_mass(mu, lower, upper, sigma):
    return float(np.exp(_log_interval_mass(mu, lower, upper, sigma)))


@lru_cache(maxsize=None)
def _cell_table(delta_r, delta_c):
    anchors = _anchors_2d()
    r_lo, r_hi = zip(*(responsibility_bounds(r, delta_r) for r in anchors[:, 0]))
    c_lo, c_hi = zip(*(responsibility_bounds(c, delta_c) for c in anchors[:, 1]))
    return np.array(r_lo), np.array(r_hi), np.array(c_lo), np.array(c_hi)


def decode_2d_log_probs(rc, cfg=DecoderConfig()):
    """Log mapping probabilities for every candidate Z = 0..103.

    ``rc`` has shape (..., 2); the result has shape (..., 104).
    """
    rc = np.asarray(rc, dtype=np.float64)
    if not np.all(np.isfinite(rc)):
        raise NonFinite("non-finite (period, group) prediction")
    r_lo, r_hi, c_lo, c_hi = _cell_table(cfg.delta_r, cfg.delta_c)
    r = rc[..., 0:1]
    c = rc[..., 1:2]
    return (_log_interval_mass(r, r_lo, r_hi, cfg.sigma)
            + _log_interval_mass(c, c_lo, c_hi, cfg.sigma))


def decode_2d_many(rc, cfg=DecoderConfig()):
    """Vectorized argmax decoding; ties resolve to the smallest Z."""
    return np.argmax(decode_2d_log_probs(rc, cfg), axis=-1)


def decode_2d(r_pred, c_pred, cfg=DecoderConfig()):
    """Decode one prediction.

    Returns ``(z_star, probabilities)`` where ``probabilities`` maps each
    candidate Z (0 for null) to its mapping probability.
    """
    logp = decode_2d_log_probs([r_pred, c_pred], cfg)
    z_star = int(np.argmax(logp))
    return z_star, dict(enumerate(np.exp(logp).tolist()))


def decode_1d_many(z_pred):
    z_pred = np.asarray(z_pred, dtype=np.float64)
    if not np.all(np.isfinite(z_pred)):
        raise NonFinite("non-finite atomic-number prediction")
    return np.argmin(np.abs(z_pred[..., None] - _anchors_1d()), axis=-1)


def decode_1d(z_pred):
    """Nearest tabulated Z in 0..94 to a normalized prediction."""
    return int(decode_1d_many(z_pred))
