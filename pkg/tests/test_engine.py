import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from urllcsim.config import RunConfig
from urllcsim.engine import (LinkSet, PowerControlParams, Simulator, _curves, attempt_mixture,
                             noise_power_per_prb_dbm, sequence_reliability, snapshot_sinr, ue_reliability,
                             ul_tx_power)
from urllcsim.linkmodel import LinkAbstraction


def small(gnbs=3, antenna="omni", bound=1.0, drops=2, ues=40, **sim):
    return RunConfig().replace(scenario={"gnbs": gnbs, "antenna": antenna}, latency={"bound_ms": bound},
                               simulation={"drops": drops, "ues_per_drop": ues, **sim})


# ------------------------------------------------------------ power control
def test_pc_reference_point_hits_target():
    pc = PowerControlParams()
    noise = noise_power_per_prb_dbm(pc.noise_figure_db)
    assert noise == pytest.approx(-174 + 10 * math.log10(360e3) + 5)
    p = ul_tx_power(pc.reference_pathloss_db, pc)
    assert p - pc.reference_pathloss_db - noise == pytest.approx(pc.snr_target_db)


@given(st.floats(40, 160), st.floats(40, 160), st.integers(1, 31))
def test_pc_monotone_and_capped(a, b, prbs):
    pc = PowerControlParams()
    lo, hi = sorted((a, b))
    assert ul_tx_power(lo, pc, prbs) <= ul_tx_power(hi, pc, prbs) + 1e-12
    assert ul_tx_power(hi, pc, prbs) <= pc.p_max_dbm + 1e-12


def test_pc_validation():
    with pytest.raises(ValueError):
        PowerControlParams(alpha=1.5)
    with pytest.raises(ValueError):
        ul_tx_power(80.0, PowerControlParams(), 0)


# ------------------------------------------------- interference state oracle
@pytest.mark.parametrize("order,direction,n", [(5.0, "DL", 3), (10.0, "UL", 3), (0.0, "DL", 2),
                                               (5.0, "UL", 1), (5.0, "DL", 4)])
def test_attempt_mixture_matches_sequence_enumeration(rng, order, direction, n):
    link = LinkAbstraction(fading_order=order)
    curves = _curves(link, n, direction)
    for _ in range(3):
        s = int(rng.integers(1, 4))
        idx = rng.integers(curves.index(-5.0), curves.index(28.0), size=(1, s))
        p = rng.dirichlet(np.ones(s))[None]
        fail, tx = attempt_mixture(curves, idx, p)
        for mi in range(len(curves.mcs)):
            rel, tx_ref = sequence_reliability(link, curves.grid_db[idx[0]], p[0], curves.mcs[mi], n, direction)
            assert fail[0, mi] == pytest.approx(1 - rel, rel=1e-9, abs=1e-13)
            assert tx[0, mi] == pytest.approx(tx_ref, rel=1e-12)


def test_single_state_reproduces_table(rng):
    link = LinkAbstraction()
    curves = _curves(link, 3, "DL")
    idx = rng.integers(0, curves.grid_db.size, size=(25, 1))
    fail, tx = attempt_mixture(curves, idx, np.ones((25, 1)))
    assert np.allclose(fail, curves.fail[:, idx[:, 0]].T, rtol=1e-9, atol=1e-14)
    assert np.allclose(tx, curves.tx[:, idx[:, 0]].T, rtol=1e-12)


def test_engine_choice_is_conservative_against_exact_sinr():
    sim = Simulator(small(gnbs=2, ues=30, drops=1))
    snap = sim.snapshots[0]
    rho = np.array([0.6, 0.4])
    chosen, _, _, _ = sim._choose(snap, "DL", rho)
    curves = sim.curves["DL"]
    for u in np.nonzero(chosen >= 0)[0][:8]:
        rel = sim.ue_reliability(snap, int(u), rho, curves.mcs[chosen[u]], "DL")
        assert rel >= sim.target - 1e-12


# --------------------------------------------------------------- properties
def test_sinr_not_above_snr():
    sim = Simulator(small(gnbs=6, ues=50, drops=1))
    snap = sim.snapshots[0]
    rng = np.random.default_rng(3)
    for d in ("DL", "UL"):
        ls = snap.links[d]
        snr = ls.signal / ls.noise
        assert np.array_equal(snapshot_sinr(snap, np.zeros(6, bool), d), snr)
        for _ in range(20):
            act = rng.random(6) < 0.5
            sinr = snapshot_sinr(snap, act, d)
            assert np.all(sinr <= snr)
            strictly = (ls.interference @ act.astype(float)) > 0
            assert np.all(sinr[strictly] < snr[strictly])
    with pytest.raises(ValueError):
        snapshot_sinr(snap, [True], "DL")


@pytest.mark.parametrize("antenna", ["omni", "bf"])
def test_load_map_monotone_in_offered_load(antenna):
    sim = Simulator(small(gnbs=3, antenna=antenna, ues=40))
    for d in ("DL", "UL"):
        prev = None
        for x in (5.0, 20.0, 60.0, 120.0):
            rho = np.concatenate([sim.solve_drop(s, x, d).rho for s in sim.snapshots])
            if prev is not None:
                assert np.all(rho >= prev - 1e-3)
            prev = rho


def test_availability_non_increasing():
    sim = Simulator(small(gnbs=2, ues=40))
    vals = [sim.availability(x) for x in (2.0, 10.0, 40.0, 100.0, 160.0)]
    assert all(b <= a for a, b in zip(vals, vals[1:]))
    assert vals[0] == 100.0 and vals[-1] < 100.0


def test_beamformed_utilisation_falls_with_density():
    means = []
    for g in (1, 6, 18):
        sim = Simulator(small(gnbs=g, antenna="bf", ues=60, drops=2))
        outs = sim.evaluate(60.0, ("DL",))
        means.append(float(np.mean([o.rho.mean() for o in outs["DL"]])))
    assert means[0] >= means[1] >= means[2]


def test_capacity_deterministic_across_workers():
    a = Simulator(small(gnbs=3, ues=30, workers=1)).capacity_search()
    b = Simulator(small(gnbs=3, ues=30, workers=3)).capacity_search()
    assert a.to_dict() == b.to_dict()


def test_capacity_bracket_straddles_result():
    res = Simulator(small(gnbs=1, ues=30)).capacity_search()
    for d, (lo, hi) in res.brackets.items():
        assert lo <= res.capacity_per_direction[d] <= hi
        assert hi - lo <= max(0.01 * lo, 0.05) + 1e-9
    assert res.max_offered == min(res.capacity_per_direction.values())
    assert res.availability_curve == sorted(res.availability_curve)


def test_verdict_reasons():
    sim = Simulator(small(gnbs=2, ues=40, drops=1))
    v, outs = sim.qos(400.0)
    assert not v.served.all()
    assert set(np.unique(v.limiting_reason)) <= {"none", "bit_rate_floor", "resource_shortage"}
    v2, _ = sim.qos(1.0)
    assert v2.served.all()


def test_ue_reliability_enumerates_all_states():
    link = LinkSet(np.array([1e-9]), 1e-12, np.array([[0.0, 1e-11, 1e-12]]))
    model = LinkAbstraction()
    from urllcsim.linkmodel import MCS_TABLE
    r_idle = ue_reliability(link, 0, np.zeros(3), MCS_TABLE[6], 1, "DL", model)
    r_busy = ue_reliability(link, 0, np.ones(3), MCS_TABLE[6], 1, "DL", model)
    r_half = ue_reliability(link, 0, np.full(3, 0.5), MCS_TABLE[6], 1, "DL", model)
    assert r_busy <= r_half <= r_idle
