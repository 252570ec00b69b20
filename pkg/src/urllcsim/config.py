"""Run configuration: nested sections loaded from YAML with strict key checking."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

SUPPORTED_GNB_COUNTS = (1, 2, 3, 6, 12, 18)


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioSection:
    floor_length: float = 120.0
    floor_width: float = 60.0
    floor_height: float = 10.0
    gnbs: int = 1
    antenna: str = "omni"
    allow_any_count: bool = False
    carrier_ghz: float = 3.6
    bandwidth_mhz: float = 100.0
    scs_khz: float = 30.0
    n_prb: int = 273
    gnb_tx_power_dbm: float = 30.0
    gnb_noise_figure_db: float = 5.0
    das_antennas: int = 8
    das_tx_power_dbm: float = 30.0
    das_noise_figure_db: float = 19.0
    ue_tx_power_dbm: float = 23.0
    ue_noise_figure_db: float = 9.0


@dataclass
class ClutterSection:
    density_r: float = 0.6
    clutter_height_hc: float = 6.0
    clutter_size_dclutter: float = 2.0
    gnb_height_hbs: float = 8.0
    ue_height_hut: float = 1.5


@dataclass
class ChannelSection:
    sigma_los_db: float = 4.3
    sigma_nlos_db: float = 4.0
    min_distance_m: float = 1.0


@dataclass
class AntennaSection:
    a_max_db: float = 30.0
    omni_gain_dbi: float = 2.0
    omni_hpbw_el_deg: float = 80.0
    dir_gain_dbi: float = 6.0
    dir_hpbw_deg: float = 90.0
    dir_downtilt_deg: float = 90.0
    bf_rows: int = 4
    bf_cols: int = 4
    bf_polarizations: int = 2
    bf_element_gain_dbi: float = 5.0
    bf_element_hpbw_deg: float = 90.0
    bf_spacing_wavelengths: float = 0.5
    das_gain_dbi: float = 0.0
    das_hpbw_deg: float = 90.0
    das_tilt_deg: float = 35.0


@dataclass
class LinkSection:
    payload_bytes: int = 32
    tti_symbols: int = 7
    loss_base_db: float = 0.0
    loss_slope_db: float = 0.0
    pdcch_payload_bits: int = 40
    pdcch_blocklength: int = 864
    p3_nack_detect: float = 0.9999
    p4_dtx_detect: float = 0.99
    # Nakagami-m diversity order per receiver: single-antenna UE, dual-branch gNodeB
    fading_order_dl: float = 5.0
    fading_order_ul: float = 10.0


@dataclass
class LatencySection:
    bound_ms: float = 1.0
    tdd_pattern: str = "DUDU"
    alignment_worst_ms: float = 0.50
    rx_processing_ms: float = 0.18
    harq_rtt_ms: float = 1.00


@dataclass
class PowerControlSection:
    snr_target_db: float = 10.0
    alpha: float = 0.8
    p_max_dbm: float = 23.0
    reference_pathloss_db: float = 100.0


@dataclass
class SimulationSection:
    ues_per_drop: int = 200
    drops: int = 20
    seed: int = 1
    reliability_target: float = 0.99999
    max_enumerated_interferers: int = 8
    fixed_point_tol: float = 1e-4
    fixed_point_max_iter: int = 100
    workers: int = 1


@dataclass
class CapacitySection:
    start_mbps: float = 20.0
    rel_tol: float = 0.01
    abs_tol_mbps: float = 0.05
    max_mbps: float = 20000.0
    max_iter: int = 60


@dataclass
class RunConfig:
    scenario: ScenarioSection = field(default_factory=ScenarioSection)
    clutter: ClutterSection = field(default_factory=ClutterSection)
    channel: ChannelSection = field(default_factory=ChannelSection)
    antennas: AntennaSection = field(default_factory=AntennaSection)
    link: LinkSection = field(default_factory=LinkSection)
    latency: LatencySection = field(default_factory=LatencySection)
    power_control: PowerControlSection = field(default_factory=PowerControlSection)
    simulation: SimulationSection = field(default_factory=SimulationSection)
    capacity: CapacitySection = field(default_factory=CapacitySection)

    def validate(self) -> "RunConfig":
        s = self.scenario
        if s.gnbs < 1:
            raise ConfigError(f"scenario.gnbs must be >= 1, got {s.gnbs}")
        from .antenna import AntennaKind
        kind = AntennaKind.parse(s.antenna)
        if kind is not AntennaKind.DAS and not s.allow_any_count and s.gnbs not in SUPPORTED_GNB_COUNTS:
            raise ConfigError(f"scenario.gnbs={s.gnbs} not in {SUPPORTED_GNB_COUNTS}; "
                              "set scenario.allow_any_count to override")
        if min(s.floor_length, s.floor_width, s.floor_height) <= 0:
            raise ConfigError("floor dimensions must be positive")
        c = self.clutter
        if not 0 < c.density_r < 1:
            raise ConfigError("clutter.density_r must be in (0, 1)")
        if not c.ue_height_hut < c.clutter_height_hc < c.gnb_height_hbs <= s.floor_height:
            raise ConfigError("need ue_height_hut < clutter_height_hc < gnb_height_hbs <= floor_height")
        if not 0 <= self.power_control.alpha <= 1:
            raise ConfigError("power_control.alpha must be in [0, 1]")
        if not 0 < self.simulation.reliability_target < 1:
            raise ConfigError("simulation.reliability_target must be in (0, 1)")
        if self.simulation.ues_per_drop < 1 or self.simulation.drops < 1:
            raise ConfigError("simulation.ues_per_drop and simulation.drops must be >= 1")
        if self.latency.bound_ms <= 0:
            raise ConfigError("latency.bound_ms must be positive")
        if set(self.latency.tdd_pattern) - {"D", "U"}:
            raise ConfigError("latency.tdd_pattern must only contain D and U")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def replace(self, **sections: dict) -> "RunConfig":
        """Copy with per-section field overrides, e.g. ``replace(scenario={"gnbs": 6})``."""
        data = self.to_dict()
        for name, updates in sections.items():
            if name not in data:
                raise ConfigError(f"unknown section {name!r}")
            data[name].update(updates)
        return from_dict(data)


def _section(cls, data: Any, path: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(data).__name__}")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ConfigError(f"{path}: unknown keys {unknown}; allowed: {sorted(names)}")
    kwargs = {}
    for key, value in data.items():
        default = getattr(cls(), key)
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise ConfigError(f"{path}.{key}: expected bool, got {value!r}")
        elif isinstance(default, int):
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{path}.{key}: expected integer, got {value!r}")
        elif isinstance(default, float):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{path}.{key}: expected number, got {value!r}")
            value = float(value)
        elif isinstance(default, str) and not isinstance(value, str):
            raise ConfigError(f"{path}.{key}: expected string, got {value!r}")
        kwargs[key] = value
    return cls(**kwargs)


def from_dict(data: dict | None) -> RunConfig:
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    fields = {f.name: f for f in dataclasses.fields(RunConfig)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(f"unknown sections {unknown}; allowed: {sorted(fields)}")
    sections = {name: _section(f.default_factory().__class__, data.get(name), name)
                for name, f in fields.items()}
    return RunConfig(**sections).validate()


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig().validate()
    with open(path) as fh:
        return from_dict(yaml.safe_load(fh))


def dump_config(cfg: RunConfig, path: str | Path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(cfg.to_dict(), fh, sort_keys=False)
