import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from urllcsim.linkmodel import (MCS_TABLE, LinkAbstraction, McsEntry, ReliabilityCurves, combined_cdf,
                                combining_law, combining_shift, fading_masses, normal_approx_error, prbs_required,
                                select_mcs, spectral_efficiency, threshold_snr_db, threshold_table)

# mpmath at 40 digits, Q((nC - b + log2(n)/2) / sqrt(nV)); frozen
NORMAL_APPROX_GOLDEN = [
    (-8.5, 2604, 260.4, 4.8339245350918269e-12),
    (-7.8, 2604, 260.4, 8.80337040745499e-18),
    (1.0, 420, 280, 9.5549244550578073e-17),
    (17.0, 84, 336, 6.4534235128415566e-28),
    (-10.0, 864, 40, 1.0861344959894057e-6),
    (-7.0, 864, 40, 1.383638409114292e-16),
]

# bisection on the direct (non-tabulated) path at 1e-5, MCS in SE order; frozen
THRESHOLDS_DB = {
    ("DL", 5.0, 1): [1.236, 4.378, 7.701, 10.344, 14.465, 17.416, 19.921, 24.41, 25.997],
    ("DL", 5.0, 3): [-6.157, -4.076, -0.815, 1.823, 5.931, 8.889, 11.378, 15.918, 17.5],
    ("UL", 10.0, 1): [-3.55, -0.386, 2.938, 5.578, 9.688, 12.645, 15.137, 19.667, 21.25],
    ("UL", 10.0, 3): [-9.401, -6.363, -3.041, -0.407, 3.685, 6.653, 9.121, 13.725, 15.303],
}


def test_mcs_list():
    names = [m.name for m in MCS_TABLE]
    assert names == ["QPSK 1/20", "QPSK 1/10", "QPSK 1/5", "QPSK 1/3", "16QAM 1/3", "16QAM 1/2",
                     "16QAM 2/3", "64QAM 2/3", "64QAM 3/4"]
    assert max(m.spectral_efficiency for m in MCS_TABLE) == 4.5
    assert McsEntry.of(6, "3/4").code_rate == Fraction(3, 4)


@pytest.mark.parametrize("snr_db,n,bits,expect", NORMAL_APPROX_GOLDEN)
def test_normal_approximation_against_high_precision(snr_db, n, bits, expect):
    assert normal_approx_error(10 ** (snr_db / 10), n, bits) == pytest.approx(expect, rel=1e-11)


def test_prbs_required():
    # 256 bits over 84 RE per PRB
    assert [prbs_required(256, m) for m in MCS_TABLE] == [31, 16, 8, 5, 3, 2, 2, 1, 1]
    with pytest.raises(ValueError):
        prbs_required(0, MCS_TABLE[0])


def test_fading_masses_are_a_distribution():
    for m in (1.0, 5.0, 10.0):
        nodes, mass, below = fading_masses(m)
        assert np.all(mass >= 0)
        assert below + mass.sum() == pytest.approx(1.0, abs=1e-14)
        assert np.all(np.diff(nodes) > 0)
    nodes, mass, below = fading_masses(0.0)
    assert nodes.tolist() == [0.0] and mass.tolist() == [1.0] and below == 0.0


@pytest.mark.parametrize("mi,snr_db", [(3, 12.0), (0, 3.0), (8, 28.0)])
def test_faded_bler_against_quadrature(mi, snr_db):
    link = LinkAbstraction()
    mcs, s = MCS_TABLE[mi], 10 ** (snr_db / 10)

    def f(g):
        return float(link.awgn_bler(g * s, mcs)) * stats.gamma.pdf(g, 5, scale=0.2)
    ref, _ = integrate.quad(f, 0, 20, points=[0.05, 0.1, 0.2, 0.5, 1, 2], limit=400, epsabs=1e-16)
    # 0.05 dB quadrature of the Gamma law
    assert float(link.bler(s, mcs)) == pytest.approx(ref, rel=1e-3)


def test_no_fading_is_plain_awgn():
    link = LinkAbstraction(fading_order=0.0)
    snr = np.logspace(-1, 3, 20)
    for m in MCS_TABLE:
        assert np.array_equal(link.bler(snr, m), link.awgn_bler(snr, m))
        cum = link.cumulative_bler(snr, m, 3)
        for k in (1, 2, 3):
            # combining gain k snaps down to the 0.05 dB grid
            gain = 10 ** (combining_shift(k, 0.05) * 0.05 / 10)
            assert k / gain < 10 ** (0.05 / 10)
            assert np.allclose(cum[..., k - 1], link.awgn_bler(gain * snr, m), rtol=1e-12, atol=0)


@pytest.mark.parametrize("order", [0.0, 5.0, 10.0])
def test_bler_strictly_decreasing(order):
    link = LinkAbstraction(fading_order=order)
    grid = np.arange(-20, 40, 0.25)
    for m in MCS_TABLE:
        b = link.bler(10 ** (grid / 10), m)
        assert np.all(np.diff(b) <= 0)
        # strict wherever the value is representable away from 0 and 1
        mid = (b > 1e-250) & (b < 1 - 1e-15)
        assert np.all(np.diff(b)[mid[:-1] & mid[1:]] < 0)


def test_combined_law_bounds():
    cdf = np.linspace(0, 1, 11)
    assert np.array_equal(combined_cdf(cdf, cdf, 1), cdf)
    lag = cdf * 0.5
    h = combined_cdf(cdf, lag, 3)
    # the combined gain is at least the best attempt: its CDF lies below F^k
    assert np.all(h <= cdf ** 3 + 1e-15)
    grid, dh, low = combining_law(5.0, 3)
    assert low + dh.sum() == pytest.approx(1.0, abs=1e-12)


def test_combining_never_hurts():
    link = LinkAbstraction()
    snr = 10 ** (np.arange(-10, 30, 1.0) / 10)
    for m in MCS_TABLE:
        cum = link.cumulative_bler(snr, m, 4)
        assert np.all(np.diff(cum, axis=-1) <= 1e-15)


@pytest.mark.parametrize("direction,order,n", list(THRESHOLDS_DB))
def test_thresholds_frozen(direction, order, n):
    link = LinkAbstraction(fading_order=order)
    got = [threshold_snr_db(link, m, n, 1 - 1e-5, direction) for m in sorted(link.mcs_table)]
    assert got == pytest.approx(THRESHOLDS_DB[direction, order, n], abs=2e-3)


@pytest.mark.parametrize("direction,order,n", list(THRESHOLDS_DB))
def test_thresholds_strictly_ordered_by_se(direction, order, n):
    t = THRESHOLDS_DB[direction, order, n]
    assert all(b > a for a, b in zip(t, t[1:]))


@pytest.mark.parametrize("direction,order,n", list(THRESHOLDS_DB))
def test_lookup_tables_agree_with_direct_path(direction, order, n):
    link = LinkAbstraction(fading_order=order)
    curves = ReliabilityCurves(link, n, direction)
    for i, m in enumerate(curves.mcs):
        # grid thresholds land on the first 0.05 dB point at or above the exact one
        exact = THRESHOLDS_DB[direction, order, n][i]
        assert exact - 2e-3 <= curves.threshold_db(i) <= exact + 0.05 + 2e-3
        g = curves.grid_db[::40]
        direct = 1 - link.total_reliability(10 ** (g / 10), m, n, direction)
        assert np.allclose(curves.fail[i, ::40], direct, rtol=1e-9, atol=1e-12)


def test_spectral_efficiency_saturates_near_25_db():
    link = LinkAbstraction()
    grid = np.arange(0.0, 40.0, 0.1)
    se = np.array([spectral_efficiency(link, 10 ** (x / 10), 1) for x in grid])
    assert np.all(np.diff(se) >= 0)
    sat = grid[np.argmax(se >= 4.5)]
    assert abs(sat - 25.0) <= 5.0


def test_select_mcs_weights_and_none():
    link = LinkAbstraction()
    assert select_mcs(link, 10 ** (-20 / 10), 1) is None
    top = select_mcs(link, 10 ** 3.5, 1)
    assert top.spectral_efficiency == 4.5
    # a deep state with small weight drags the choice down
    mixed = select_mcs(link, [10 ** 3.5, 10 ** 0.5], 1, weights=[0.999, 0.001])
    assert mixed is None or mixed.spectral_efficiency < 4.5
    with pytest.raises(ValueError):
        select_mcs(link, 1.0, 0)


def test_threshold_table_shape():
    rows = threshold_table(LinkAbstraction(), attempts=(1,))
    assert len(rows) == len(MCS_TABLE)
    assert {"mcs", "prbs", "bler_snr_db", "dl_n1_snr_db", "ul_n1_snr_db"} <= set(rows[0])


@given(st.floats(-20, 40), st.sampled_from(range(len(MCS_TABLE))), st.integers(1, 3))
def test_reliability_in_unit_interval_and_monotone_in_snr(snr_db, mi, n):
    link = LinkAbstraction()
    m = MCS_TABLE[mi]
    r0 = link.total_reliability(10 ** (snr_db / 10), m, n, "DL")
    r1 = link.total_reliability(10 ** ((snr_db + 1) / 10), m, n, "DL")
    assert 0.0 <= r0 <= 1.0
    assert r1 >= r0 - 1e-15


def test_expected_transmissions_range():
    link = LinkAbstraction()
    tx = link.expected_transmissions(10 ** (np.arange(-10, 30, 2.0) / 10), MCS_TABLE[4], 3)
    assert np.all((tx >= 1.0) & (tx <= 3.0))
    assert np.all(np.diff(tx) <= 1e-12)
