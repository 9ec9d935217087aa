"""Balance Score and three-phase checkpoint selection."""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyHistory, InvalidAlpha, InvalidWindow, ParseError
from .evaluate import MetricsReport

PHASES = ("early", "mid", "late")
EARLY_END = 0.30
MID_END = 0.60


def _clamp(x):
    return min(1.0, max(0.0, x))


def component_scores(m):
    """(S_struct, S_chem, S_density, S_elements) from a report.

    Validities in the report are percentages and the clamped ramps are
    evaluated in those units, which keeps round inputs exact.  Missing
    distances score 0.
    """
    s_rho = 0.0 if m.d_rho is None else _clamp((1.0 - m.d_rho) / 0.9)
    s_elem = 0.0 if m.d_elem is None else _clamp((1.0 - m.d_elem) / 0.9)
    s_struct = _clamp((m.structural_valid_pct - 95.0) / 5.0)
    s_chem = _clamp((m.chemical_valid_pct - 80.0) / 20.0)
    return (s_struct, s_chem, s_rho, s_elem)


def quality_composite(m):
    return float(np.prod(component_scores(m)) ** 0.25)


def balance_score(m, alpha):
    if not alpha > 0:
        raise InvalidAlpha(f"alpha must be positive, got {alpha}")
    return m.un_rate * quality_composite(m) ** alpha


def phase_of(epoch, total_epochs):
    frac = epoch / total_epochs
    if frac <= EARLY_END:
        return "early"
    if frac <= MID_END:
        return "mid"
    return "late"


@dataclass
class CheckpointRecord:
    epoch: int
    metrics: MetricsReport
    balance_score: float
    phase: str


def score_history(entries, alpha, total_epochs):
    """CheckpointRecords from (epoch, MetricsReport) pairs."""
    return [CheckpointRecord(e, m, balance_score(m, alpha), phase_of(e, total_epochs))
            for e, m in entries]


def select_checkpoints(history, total_epochs=None):
    """Best raw-score record per phase; absent phases map to None.

    Ties go to the earlier epoch.  When ``total_epochs`` is given the
    phase is recomputed from it, otherwise each record's own phase is used.
    """
    if not history:
        raise EmptyHistory("no checkpoints to select from")
    best = dict.fromkeys(PHASES)
    for rec in sorted(history, key=lambda r: r.epoch):
        phase = rec.phase if total_epochs is None else phase_of(rec.epoch, total_epochs)
        cur = best[phase]
        if cur is None or rec.balance_score > cur.balance_score:
            best[phase] = rec
    return best


def moving_average(series, window=10):
    if window < 1:
        raise InvalidWindow(f"window must be >= 1, got {window}")
    x = np.asarray(series, dtype=np.float64)
    return np.array([x[max(0, i + 1 - window):i + 1].mean() for i in range(len(x))])


def append_history(path, epoch, metrics, extra=None):
    """Append one JSON line (epoch, metrics, anything extra) to a history log."""
    row = {"epoch": int(epoch), "metrics": metrics.as_dict()}
    if extra:
        row.update(extra)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a") as fh:
        fh.write(json.dumps(row) + "\n")


def read_history(path):
    """List of (epoch, MetricsReport) from a history log."""
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
            out.append((int(row["epoch"]), MetricsReport.from_dict(row["metrics"])))
        except (ValueError, KeyError, TypeError) as err:
            raise ParseError(f"bad history record: {err}", line=lineno) from err
    if not out:
        raise EmptyHistory(f"{path} holds no records")
    return out
