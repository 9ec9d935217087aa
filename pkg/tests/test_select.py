import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from crystaldit.errors import EmptyHistory, InvalidAlpha, InvalidWindow, ParseError
from crystaldit.evaluate import MetricsReport
from crystaldit.select import (CheckpointRecord, append_history, balance_score, component_scores,
                               moving_average, phase_of, quality_composite, read_history,
                               score_history, select_checkpoints)


def report(v_struct=1.0, v_chem=1.0, d_rho=0.1, d_elem=0.1, un_rate=1.0):
    return MetricsReport(n_total=100, structural_valid_pct=100 * v_struct,
                         chemical_valid_pct=100 * v_chem, d_rho=d_rho, d_elem=d_elem, un_rate=un_rate)


def test_composite_examples():
    assert quality_composite(report()) == 1.0
    assert quality_composite(report(v_struct=0.95)) == 0.0
    assert quality_composite(report(v_chem=0.9)) == pytest.approx(0.5 ** 0.25, abs=1e-15)
    assert quality_composite(report(v_chem=0.9)) == pytest.approx(0.8409, abs=5e-5)


def test_balance_examples():
    assert balance_score(report(un_rate=0.0), 2.0) == 0.0
    for alpha in (0.5, 1.0, 3.0):
        assert balance_score(report(un_rate=0.37), alpha) == 0.37
    # every component score 0.81, so the composite is 0.81
    m = report(v_struct=0.95 + 0.05 * 0.81, v_chem=0.8 + 0.2 * 0.81,
               d_rho=1 - 0.9 * 0.81, d_elem=1 - 0.9 * 0.81, un_rate=0.6)
    assert quality_composite(m) == pytest.approx(0.81, rel=1e-12)
    assert balance_score(m, 2) == pytest.approx(0.39366, rel=1e-12)


@pytest.mark.parametrize("alpha", [0, -1, float("nan")])
def test_invalid_alpha(alpha):
    with pytest.raises(InvalidAlpha):
        balance_score(report(), alpha)


def test_missing_distance_scores_zero():
    assert component_scores(report(d_rho=None))[2] == 0.0
    assert quality_composite(report(d_elem=None)) == 0.0


def random_vectors(n, seed):
    rng = np.random.default_rng(seed)
    return [dict(v_struct=rng.uniform(0.9, 1), v_chem=rng.uniform(0.7, 1), d_rho=rng.uniform(0, 1.2),
                 d_elem=rng.uniform(0, 1.2), un_rate=rng.uniform(0, 1)) for _ in range(n)]


def check_monotone(base, rng, alpha):
    b0 = balance_score(report(**base), alpha)
    for key, sign in (("un_rate", 1), ("v_struct", 1), ("v_chem", 1), ("d_rho", -1), ("d_elem", -1)):
        moved = dict(base)
        step = rng.uniform(0, 0.1)
        moved[key] = base[key] + sign * step
        if key != "un_rate" and key.startswith("v"):
            moved[key] = min(moved[key], 1.0)
        moved["un_rate"] = min(moved["un_rate"], 1.0)
        if balance_score(report(**moved), alpha) < b0:
            return False
    return True


def test_monotonicity_on_random_vectors():
    rng = np.random.default_rng(0)
    vectors = random_vectors(1000, 1)
    assert all(check_monotone(v, rng, alpha) for v in vectors for alpha in (1.0, 2.0))


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 2), st.floats(0, 2))
def test_composite_range_and_zero_set(vs, vc, dr, de):
    m = report(vs, vc, dr, de)
    q = quality_composite(m)
    assert 0.0 <= q <= 1.0
    assert (q == 0.0) == (min(component_scores(m)) == 0.0)


def test_phase_boundaries():
    assert [phase_of(e, 100) for e in (0, 30, 31, 60, 61, 100)] == \
        ["early", "early", "mid", "mid", "late", "late"]


@given(st.integers(1, 5000), st.data())
def test_phase_partition(total, data):
    epochs = range(0, total + 1)
    phases = [phase_of(e, total) for e in epochs]
    assert all(p in ("early", "mid", "late") for p in phases)
    # monotone in epoch, so each phase is one contiguous block
    order = {"early": 0, "mid": 1, "late": 2}
    assert all(order[a] <= order[b] for a, b in zip(phases, phases[1:]))


def records(scores, total):
    return [CheckpointRecord(e, report(), s, phase_of(e, total)) for e, s in scores]


def test_selection_examples():
    best = select_checkpoints(records([(100, 0.2)], 1000))
    assert best["early"].epoch == 100 and best["mid"] is None and best["late"] is None
    best = select_checkpoints(records([(500, 0.4), (400, 0.4), (700, 0.1), (900, 0.3)], 1000))
    assert best["mid"].epoch == 400 and best["late"].epoch == 900 and best["early"] is None
    with pytest.raises(EmptyHistory):
        select_checkpoints([])


def test_alpha_changes_the_mid_winner():
    # high UN with middling quality against lower UN with high quality
    a = report(v_struct=0.99, v_chem=0.9, d_rho=0.3, d_elem=0.3, un_rate=0.5)
    b = report(v_struct=1.0, v_chem=1.0, d_rho=0.1, d_elem=0.1, un_rate=0.35)
    hist = [(16250, a), (24750, b)]
    assert select_checkpoints(score_history(hist, 1.0, 50000))["mid"].epoch == 16250
    assert select_checkpoints(score_history(hist, 2.0, 50000))["mid"].epoch == 24750


def test_moving_average_examples():
    assert list(moving_average([0, 10])) == [0, 5]
    assert list(moving_average([3.0] * 7)) == [3.0] * 7
    x = np.random.default_rng(0).normal(size=25)
    assert np.array_equal(moving_average(x, 1), x)
    ref = [np.mean(x[max(0, i - 9):i + 1]) for i in range(25)]
    assert np.allclose(moving_average(x), ref, rtol=1e-12, atol=1e-12)
    with pytest.raises(InvalidWindow):
        moving_average(x, 0)


def test_history_round_trip(tmp_path):
    path = tmp_path / "h" / "history.jsonl"
    for e in (250, 500):
        append_history(path, e, report(un_rate=e / 1000), {"balance_alpha_1": 0.1})
    hist = read_history(path)
    assert [e for e, _ in hist] == [250, 500] and hist[1][1].un_rate == 0.5
    path.write_text(path.read_text() + "{broken\n")
    with pytest.raises(ParseError):
        read_history(path)
    path.write_text("\n")
    with pytest.raises(EmptyHistory):
        read_history(path)
    path.write_text(json.dumps({"epoch": 1}) + "\n")
    with pytest.raises(ParseError):
        read_history(path)
