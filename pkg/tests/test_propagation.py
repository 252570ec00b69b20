import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from urllcsim.propagation import (ChannelConstants, ClutterParams, distances, large_scale, link_budget,
                                  los_probability, pathloss, sample_shadow)


def test_los_decay_distance():
    c = ClutterParams()
    # -2 / ln(0.4) * 6.5 / 4.5
    assert c.k_subsce == pytest.approx(-2.0 / np.log(0.4) * 6.5 / 4.5, rel=1e-12)
    assert c.k_subsce == pytest.approx(3.153, abs=1e-3)
    assert los_probability(0.0, c) == 1.0


@given(st.floats(0, 300), st.floats(0, 300))
def test_los_probability_monotone(a, b):
    c = ClutterParams()
    lo, hi = sorted((a, b))
    assert los_probability(hi, c) <= los_probability(lo, c)


@given(st.floats(0.0, 500.0), st.floats(0.0, 500.0), st.booleans())
def test_pathloss_monotone(a, b, los):
    lo, hi = sorted((a, b))
    assert pathloss(hi, 3.6, los) >= pathloss(lo, 3.6, los)


def test_pathloss_values_and_clamp():
    # 31.84 + 21.5 log10(d) + 19 log10(fc)
    assert pathloss(10.0, 3.6, True) == pytest.approx(31.84 + 21.5 + 19 * np.log10(3.6))
    assert pathloss(0.2, 3.6, True) == pathloss(1.0, 3.6, True)
    # NLOS never better than LOS
    d = np.linspace(1, 200, 50)
    assert np.all(pathloss(d, 3.6, False) >= pathloss(d, 3.6, True))


def test_shadowing_statistics(rng):
    los = np.ones(200000, dtype=bool)
    s = sample_shadow(los, rng)
    assert s.std() == pytest.approx(4.3, rel=0.02)
    assert abs(s.mean()) < 0.05
    assert sample_shadow(~los[:200000], rng).std() == pytest.approx(4.0, rel=0.02)


def test_large_scale_shapes_and_link_budget(rng):
    tx = np.array([[0.0, 0.0, 8.0], [10.0, 0.0, 8.0]])
    rx = rng.random((5, 3)) * [120, 60, 0] + [0, 0, 1.5]
    d2, d3, los, pl, sh = large_scale(tx, rx, 3.6, ClutterParams(), rng)
    assert d2.shape == d3.shape == los.shape == pl.shape == sh.shape == (2, 5)
    assert np.all(d3 >= d2)
    link = link_budget([0, 0, 8], [3, 4, 1.5], 3.6, ClutterParams(), rng, 2.0, 0.0)
    assert link.d2d == pytest.approx(5.0)
    assert link.coupling_gain == pytest.approx(-link.pathloss - link.shadow + 2.0)


def test_distances_broadcast():
    d2, d3 = distances([0, 0, 0], [[3, 4, 0], [0, 0, 2]])
    assert d2.tolist() == [[5.0, 0.0]]
    assert d3.tolist() == [[5.0, 2.0]]


def test_clutter_validation():
    with pytest.raises(ValueError):
        ClutterParams(density_r=1.0)
    with pytest.raises(ValueError):
        ClutterParams(clutter_height_hc=9.0)
    with pytest.raises(ValueError):
        los_probability(-1.0, ClutterParams())
    assert ChannelConstants().min_distance_m == 1.0
