import pytest
from hypothesis import given
from hypothesis import strategies as st

from urllcsim.latency import (ProcessingDelays, TddPattern, feasible_attempts, latency_budget, latency_table,
                              worst_case_latency)

TABLE_MS = {1: 0.93, 2: 1.93, 3: 2.93}


def test_sub_slot_timing():
    p = TddPattern()
    assert p.sub_slot_duration_ms == pytest.approx(0.25)
    assert p.period_ms == pytest.approx(1.0)
    assert p.sub_slots_per_second("DL") == pytest.approx(2000.0)
    assert p.max_gap_ms("UL") == pytest.approx(0.5)


@pytest.mark.parametrize("direction", ["DL", "UL"])
def test_worst_case_table(direction):
    for n, expect in TABLE_MS.items():
        assert worst_case_latency(TddPattern(), ProcessingDelays(), n, direction) == pytest.approx(expect, abs=1e-9)


def test_table_rows():
    rows = latency_table()
    assert [(r["attempts"], r["dl_ms"], r["ul_ms"]) for r in rows] == [(1, 0.93, 0.93), (2, 1.93, 1.93),
                                                                       (3, 2.93, 2.93)]


def test_attempt_budgets():
    p, d = TddPattern(), ProcessingDelays()
    assert feasible_attempts(p, d, 1.0) == 1
    assert feasible_attempts(p, d, 3.0) == 3
    assert feasible_attempts(p, d, 0.5) == 0
    b = latency_budget(p, d, 3.0)
    assert b.attempts("DL") == b.attempts("UL") == 3


@given(st.floats(0.05, 30.0))
def test_budget_is_largest_fitting(bound):
    p, d = TddPattern(), ProcessingDelays()
    n = feasible_attempts(p, d, bound)
    if n:
        assert worst_case_latency(p, d, n) <= bound + 1e-9
    assert worst_case_latency(p, d, n + 1) > bound


def test_invalid_inputs():
    with pytest.raises(ValueError):
        TddPattern(("D", "X"))
    with pytest.raises(ValueError):
        worst_case_latency(TddPattern(), ProcessingDelays(), 0)
    with pytest.raises(ValueError):
        feasible_attempts(TddPattern(), ProcessingDelays(), 0.0)
    with pytest.raises(ValueError):
        TddPattern(("D", "D")).max_gap_ms("UL")
