import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from urllcsim.antenna import (DOWN, AntennaKind, BeamArray, array_factor, beam_gain, beam_weights,
                              das_combine_dl, das_combine_ul, directional_pattern, element_gain, omni_pattern,
                              pattern_cut)


def _dir(az_deg, el_deg):
    az, el = math.radians(az_deg), math.radians(el_deg)
    return np.array([math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), math.sin(el)])


def test_parse_kinds():
    assert AntennaKind.parse("dir") is AntennaKind.DIRECTIONAL
    assert AntennaKind.parse("bf") is AntennaKind.BEAMFORMED
    with pytest.raises(ValueError):
        AntennaKind.parse("yagi")


def test_omni_pattern():
    p = omni_pattern()
    assert element_gain(p, _dir(37, 0)) == pytest.approx(2.0)
    # 12 (40/80)^2 = 3 dB down at half the half-power beamwidth... at 40 deg elevation
    assert element_gain(p, _dir(0, 40)) == pytest.approx(2.0 - 3.0)
    assert element_gain(p, _dir(0, -90)) == pytest.approx(2.0 - 15.1875)


def test_directional_points_down():
    p = directional_pattern()
    assert element_gain(p, DOWN) == pytest.approx(6.0)
    assert element_gain(p, _dir(0, -45)) == pytest.approx(3.0, abs=1e-9)
    assert element_gain(p, _dir(0, 90)) == pytest.approx(6.0 - 30.0)


def test_pattern_cut_peak_at_boresight():
    cut = pattern_cut(directional_pattern(), step_deg=5.0)
    assert cut[np.argmax(cut[:, 1]), 0] == 0.0
    assert cut.shape == (73, 2)


@given(st.floats(0, 359), st.floats(-89, -10))
def test_beam_gain_peaks_at_steered_direction(az, el):
    arr = BeamArray()
    target = _dir(az, el)
    w = beam_weights(arr, target)
    assert array_factor(arr, w, target) == pytest.approx(arr.n_spatial, rel=1e-9)
    probes = np.array([_dir(a, e) for a in np.arange(0, 360, 7.0) for e in np.arange(-89, 0, 7.0)])
    assert np.all(array_factor(arr, w, probes) <= arr.n_spatial * (1 + 1e-9))


def test_beam_gain_value():
    arr = BeamArray()
    w = beam_weights(arr, DOWN)
    assert beam_gain(arr, w, DOWN) == pytest.approx(5.0 + 10 * math.log10(16))
    assert arr.polarization_gain_db == pytest.approx(10 * math.log10(2))


def test_das_combining():
    assert das_combine_dl([1.0, 2.0, 3.0]) == 6.0
    assert das_combine_ul(np.ones(8)) == 8.0
    with pytest.raises(ValueError):
        das_combine_dl([-1.0])
    with pytest.raises(ValueError):
        das_combine_ul([-1.0])
