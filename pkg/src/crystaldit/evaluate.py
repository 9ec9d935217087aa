"""Structural/compositional screening and distribution metrics for generated crystals.

Every rate uses the number of attempted samples as its denominator, so
candidates that fail to parse or are rejected by the pre-filter count as
invalid, not unique and not novel.
"""

import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .cif import ParsedCIF, parse_cif
from .composition import DEFAULT_MAX_COMBINATIONS, compositional_validity
from .errors import CrystalDiTError, DatasetError, EmptyInput
from .lattice import density, min_periodic_distance, volume
from .matcher import MatcherTolerances, structures_match
from .sample import DECODE_LOG
from .tensorize import CrystalStructure

MIN_DISTANCE = 0.5
MIN_VOLUME = 0.1
MAX_PREFILTER_Z = 104
DISTANCE_SAMPLE_SIZE = 1000


@dataclass
class PrefilterResult:
    passed: bool
    reason: str | None = None
    structure: CrystalStructure | None = None


def prefilter(candidate):
    """Sequential sanity checks on a parsed CIF or a structure.

    The first failing check names the rejection reason: AtomicNumberRange,
    NonPositiveLattice, NonFinite, StructureConstruction or MinVolume.
    """
    if isinstance(candidate, CrystalStructure):
        from .lattice import lattice_params

        species = candidate.species
        params = lattice_params(candidate.lattice)
        lengths, angles, coords = params[:3], params[3:], candidate.frac_coords
    else:
        species, lengths, angles, coords = (
            candidate.species, candidate.lengths, candidate.angles, candidate.frac_coords)
    if any(not 1 <= z <= MAX_PREFILTER_Z for z in species):
        return PrefilterResult(False, "AtomicNumberRange")
    if any(length <= 0 for length in lengths):
        return PrefilterResult(False, "NonPositiveLattice")
    values = np.concatenate([np.asarray(lengths, float), np.asarray(angles, float),
                             np.asarray(coords, float).ravel()])
    if not np.all(np.isfinite(values)):
        return PrefilterResult(False, "NonFinite")
    try:
        structure = candidate if isinstance(candidate, CrystalStructure) else candidate.to_structure()
    except (CrystalDiTError, ValueError):
        return PrefilterResult(False, "StructureConstruction")
    if not volume(structure.lattice) >= MIN_VOLUME:
        return PrefilterResult(False, "MinVolume")
    return PrefilterResult(True, None, structure)


def structural_validity(structure):
    """All periodic interatomic distances >= 0.5 A and cell volume >= 0.1 A^3."""
    if volume(structure.lattice) < MIN_VOLUME:
        return False
    return min_periodic_distance(structure.lattice, structure.frac_coords) >= MIN_DISTANCE


def wasserstein_1d(a, b):
    """First Wasserstein distance between two empirical distributions.

    Integrates the absolute difference of the quantile functions.  The
    probability axis is cut on the integer grid ``lcm(n, m)`` so that
    segment widths are exact.
    """
    a = np.sort(np.asarray(a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(b, dtype=np.float64).ravel())
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        raise EmptyInput("wasserstein_1d needs two non-empty samples")
    total = math.lcm(n, m)
    step_a, step_b = total // n, total // m
    ends = np.union1d(np.arange(1, n + 1, dtype=np.int64) * step_a,
                      np.arange(1, m + 1, dtype=np.int64) * step_b)
    starts = np.concatenate([[0], ends[:-1]])
    widths = ends - starts
    gaps = np.abs(a[starts // step_a] - b[starts // step_b])
    return float(np.sum(widths * gaps) / total)


def element_values(structures):
    return np.concatenate([np.asarray(s.species, dtype=np.float64) for s in structures])


def distribution_distances(gen, ref, seed=0, sample_size=DISTANCE_SAMPLE_SIZE):
    """(density distance, element distance) between generated and reference sets.

    At most ``sample_size`` generated structures are drawn without
    replacement; the reference set is used whole.
    """
    if not gen or not ref:
        raise EmptyInput("distribution distances need non-empty sets")
    rng = np.random.default_rng(seed)
    k = min(sample_size, len(gen))
    picked = [gen[i] for i in np.sort(rng.choice(len(gen), size=k, replace=False))]
    d_rho = wasserstein_1d([density(s) for s in picked], [density(s) for s in ref])
    d_elem = wasserstein_1d(element_values(picked), element_values(ref))
    return d_rho, d_elem


@dataclass
class UNFlags:
    excluded: bool
    unique: bool
    novel: bool


def _by_system(structures):
    groups = defaultdict(list)
    for k, s in enumerate(structures):
        groups[s.chemical_system].append(k)
    return groups


def uniqueness_novelty(gen, train, tol=MatcherTolerances()):
    """Per-structure flags; single-element structures are excluded.

    Matching only happens inside a chemical system, since structures with
    different element sets can never match.
    """
    flags = [UNFlags(excluded=len(set(s.species)) < 2, unique=False, novel=False) for s in gen]
    train_groups = _by_system(train)
    for system, members in _by_system(gen).items():
        members = [k for k in members if not flags[k].excluded]
        duplicate = set()
        for x, i in enumerate(members):
            for j in members[x + 1:]:
                if structures_match(gen[i], gen[j], tol):
                    duplicate.update((i, j))
        refs = [train[k] for k in train_groups.get(system, [])]
        for i in members:
            flags[i].unique = i not in duplicate
            flags[i].novel = not any(structures_match(gen[i], r, tol) for r in refs)
    return flags


@dataclass
class MetricsReport:
    n_total: int = 0
    n_prefilter_pass: int = 0
    structural_valid_pct: float = 0.0
    chemical_valid_pct: float = 0.0
    d_rho: float | None = None
    d_elem: float | None = None
    unique_pct: float = 0.0
    novel_pct: float = 0.0
    un_rate: float = 0.0
    n_un: int = 0
    n_excluded_single_element: int = 0
    skip_reasons: dict = field(default_factory=dict)
    stable_in_un: float | None = None
    metastable_in_un: float | None = None
    sun: float | None = None
    msun: float | None = None

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


def _pct(count, total):
    return 100.0 * count / total if total else 0.0


def evaluate_candidates(candidates, test, train, seed=0, n_total=None,
                        tol=MatcherTolerances(), max_combinations=DEFAULT_MAX_COMBINATIONS):
    """Full screening of in-memory candidates.

    ``candidates`` holds ParsedCIF or CrystalStructure objects, or strings
    naming why a candidate could not be read at all.
    """
    n_total = len(candidates) if n_total is None else n_total
    reasons = Counter()
    passed = []
    for cand in candidates:
        if isinstance(cand, str):
            reasons[cand] += 1
            continue
        res = prefilter(cand)
        if res.passed:
            passed.append(res.structure)
        else:
            reasons[res.reason] += 1
    reasons["Dropped"] += n_total - len(candidates)
    struct_ok = [structural_validity(s) for s in passed]
    chem_ok = [compositional_validity(s.species, max_combinations) for s in passed]
    both = [s for s, a, b in zip(passed, struct_ok, chem_ok) if a and b]
    d_rho = d_elem = None
    if both and test:
        d_rho, d_elem = distribution_distances(both, test, seed)
    flags = uniqueness_novelty(passed, train, tol)
    n_unique = sum(f.unique for f in flags)
    n_novel = sum(f.novel for f in flags)
    n_un = sum(f.unique and f.novel for f in flags)
    return MetricsReport(
        n_total=n_total,
        n_prefilter_pass=len(passed),
        structural_valid_pct=_pct(sum(struct_ok), n_total),
        chemical_valid_pct=_pct(sum(chem_ok), n_total),
        d_rho=d_rho,
        d_elem=d_elem,
        unique_pct=_pct(n_unique, n_total),
        novel_pct=_pct(n_novel, n_total),
        un_rate=n_un / n_total if n_total else 0.0,
        n_un=n_un,
        n_excluded_single_element=sum(f.excluded for f in flags),
        skip_reasons={k: v for k, v in sorted(reasons.items()) if v},
    )


def read_candidates(gen_dir):
    """Parsed CIFs from a directory plus the attempted-sample count.

    A ``decode_log.json`` written by the sampler adds the samples that
    decoded to no atoms and therefore have no CIF.
    """
    gen_dir = Path(gen_dir)
    if not gen_dir.is_dir():
        raise DatasetError(f"{gen_dir} is not a directory")
    candidates = []
    for f in sorted(gen_dir.glob("*.cif")):
        try:
            candidates.append(parse_cif(f.read_text()))
        except CrystalDiTError as err:
            candidates.append(type(err).__name__)
    n_total = len(candidates)
    log = gen_dir / DECODE_LOG
    if log.exists():
        n_total += int(json.loads(log.read_text()).get("n_dropped", 0))
    return candidates, n_total


def evaluate_batch(gen_dir, test, train, seed=0, tol=MatcherTolerances(),
                   max_combinations=DEFAULT_MAX_COMBINATIONS):
    """Evaluate a directory of generated CIFs against test and training structures."""
    candidates, n_total = read_candidates(gen_dir)
    return evaluate_candidates(candidates, test, train, seed, n_total, tol, max_combinations)


__all__ = [
    "MetricsReport", "ParsedCIF", "PrefilterResult", "UNFlags", "distribution_distances",
    "evaluate_batch", "evaluate_candidates", "prefilter", "read_candidates",
    "structural_validity", "uniqueness_novelty", "wasserstein_1d",
]
