import json

import numpy as np
import pytest

from urllcsim.antenna import AntennaKind
from urllcsim.config import ConfigError, RunConfig, dump_config, from_dict, load_config
from urllcsim.scenario import build_scenario, drop_ues, place_gnbs


def test_defaults_valid_and_hash_stable():
    a, b = RunConfig().validate(), RunConfig()
    assert a.digest() == b.digest()
    assert a.replace(simulation={"seed": 2}).digest() != a.digest()


def test_yaml_round_trip(tmp_path):
    cfg = RunConfig().replace(scenario={"gnbs": 6, "antenna": "bf"}, latency={"bound_ms": 3.0})
    path = tmp_path / "c.yaml"
    dump_config(cfg, path)
    assert load_config(path) == cfg
    assert load_config(None) == RunConfig()


@pytest.mark.parametrize("data", [
    {"scenario": {"gnbs": 5}},
    {"scenario": {"gnbz": 5}},
    {"nonsense": {}},
    {"scenario": {"gnbs": "six"}},
    {"simulation": {"reliability_target": 1.5}},
    {"clutter": {"density_r": 1.0}},
    {"latency": {"tdd_pattern": "DXU"}},
    {"scenario": {"antenna": "yagi"}},
])
def test_invalid_configs_rejected(data):
    with pytest.raises((ConfigError, ValueError)):
        from_dict(data)


def test_any_count_override():
    cfg = from_dict({"scenario": {"gnbs": 8, "allow_any_count": True}})
    assert build_scenario(cfg).n_cells == 8


@pytest.mark.parametrize("count", [1, 2, 3, 6, 12, 18])
def test_gnb_grid_inside_floor(count):
    pos = np.array(place_gnbs(count, (120.0, 60.0)))
    assert len(pos) == count
    assert np.all((pos[:, 0] > 0) & (pos[:, 0] < 120) & (pos[:, 1] > 0) & (pos[:, 1] < 60))
    assert np.all(pos[:, 2] == 8.0)
    assert len({tuple(p) for p in pos}) == count


def test_das_layout_and_id(tmp_path):
    sc = build_scenario(RunConfig().replace(scenario={"antenna": "das"}))
    assert sc.scenario_id == "das_1gnb"
    assert len(sc.das.antenna_positions) == 8
    assert sc.das.noise_figure_db == 19.0
    with pytest.raises(ConfigError):
        build_scenario(RunConfig().replace(scenario={"antenna": "das", "gnbs": 2}))
    sc.dump_json(tmp_path / "s.json")
    d = json.loads((tmp_path / "s.json").read_text())
    assert d["antenna_kind"] == "das" and d["scenario_id"] == "das_1gnb"


def test_scenario_ids():
    sc = build_scenario(RunConfig().replace(scenario={"gnbs": 6, "antenna": "dir"}))
    assert sc.scenario_id == "dir_6gnb"
    assert sc.antenna_kind is AntennaKind.DIRECTIONAL


def test_drops_reproducible_and_inside():
    a = drop_ues(200, 7)
    b = drop_ues(200, 7)
    assert np.array_equal(a.positions, b.positions)
    assert np.all((a.positions[:, 0] >= 0) & (a.positions[:, 0] <= 120))
    assert np.all(a.positions[:, 2] == 1.5)
    assert not np.array_equal(a.positions, drop_ues(200, 8).positions)
    with pytest.raises(ValueError):
        drop_ues(0, 1)
