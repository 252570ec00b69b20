"""Factory floor, gNodeB/DAS layouts and UE drops."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .antenna import AntennaKind
from .config import SUPPORTED_GNB_COUNTS, ConfigError, RunConfig
from .propagation import ClutterParams

# columns x rows, columns along the long (x) axis
GRID_SHAPES = {1: (1, 1), 2: (2, 1), 3: (3, 1), 6: (3, 2), 12: (4, 3), 18: (6, 3)}
DAS_GRID = (4, 2)


@dataclass(frozen=True)
class GnbSite:
    position: tuple[float, float, float]
    antenna_kind: AntennaKind
    tx_power_dbm: float = 30.0
    noise_figure_db: float = 5.0


@dataclass(frozen=True)
class DasLayout:
    antenna_positions: tuple[tuple[float, float, float], ...]
    per_antenna_tx_power_dbm: float = 30.0
    noise_figure_db: float = 19.0
    downtilt_deg: float = 35.0
    element_gain_dbi: float = 0.0
    hpbw_deg: float = 90.0

    def __post_init__(self):
        if len(self.antenna_positions) != 8:
            raise ValueError(f"DAS needs exactly 8 antennas, got {len(self.antenna_positions)}")


@dataclass(frozen=True)
class UeDrop:
    positions: np.ndarray
    seed: int

    def __len__(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class FactoryScenario:
    floor_length: float
    floor_width: float
    floor_height: float
    clutter: ClutterParams
    gnbs: tuple[GnbSite, ...]
    antenna_kind: AntennaKind
    das: DasLayout | None = None
    ue_height: float = 1.5
    carrier_ghz: float = 3.6
    bandwidth_mhz: float = 100.0
    scs_khz: float = 30.0

    @property
    def n_cells(self) -> int:
        return len(self.gnbs)

    @property
    def scenario_id(self) -> str:
        if self.das is not None:
            return "das_1gnb"
        return f"{self.antenna_kind.value}_{self.n_cells}gnb"

    def contains(self, pos) -> bool:
        p = np.atleast_2d(np.asarray(pos, dtype=float))
        return bool(np.all((p >= 0) & (p <= [self.floor_length, self.floor_width, self.floor_height])))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["antenna_kind"] = self.antenna_kind.value
        d["gnbs"] = [{**asdict(g), "antenna_kind": g.antenna_kind.value} for g in self.gnbs]
        d["scenario_id"] = self.scenario_id
        return d

    def dump_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))


def grid_centers(cols: int, rows: int, length: float, width: float, height: float) -> list[tuple[float, float, float]]:
    px, py = length / cols, width / rows
    return [((i + 0.5) * px, (j + 0.5) * py, height) for j in range(rows) for i in range(cols)]


def place_gnbs(count: int, floor: tuple[float, float], height: float = 8.0) -> list[tuple[float, float, float]]:
    """Grid-cell centres of a uniform rectangular layout over the floor."""
    if count not in GRID_SHAPES:
        raise ValueError(f"unsupported gNodeB count {count}; expected one of {SUPPORTED_GNB_COUNTS}")
    cols, rows = GRID_SHAPES[count]
    return grid_centers(cols, rows, floor[0], floor[1], height)


def _any_count_layout(count: int, floor: tuple[float, float], height: float):
    # most-square grid with columns along the long axis; used only with allow_any_count
    best = None
    for rows in range(1, count + 1):
        if count % rows:
            continue
        cols = count // rows
        score = abs((floor[0] / cols) - (floor[1] / rows))
        if cols >= rows and (best is None or score < best[0]):
            best = (score, cols, rows)
    if best is None:
        best = (0, count, 1)
    return grid_centers(best[1], best[2], floor[0], floor[1], height)


def drop_ues(n: int, seed: int | np.random.SeedSequence, floor: tuple[float, float] = (120.0, 60.0),
             height: float = 1.5) -> UeDrop:
    """``n`` UEs i.i.d. uniform over the floor at antenna height ``height``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    xy = rng.random((n, 2)) * np.asarray(floor, dtype=float)
    pos = np.column_stack([xy, np.full(n, height)])
    s = seed if isinstance(seed, int) else int(seed.generate_state(1)[0])
    return UeDrop(pos, s)


def build_scenario(config: RunConfig) -> FactoryScenario:
    config.validate()
    s, c = config.scenario, config.clutter
    kind = AntennaKind.parse(s.antenna)
    clutter = ClutterParams(c.density_r, c.clutter_height_hc, c.clutter_size_dclutter,
                            c.gnb_height_hbs, c.ue_height_hut)
    floor = (s.floor_length, s.floor_width)
    das = None
    if kind is AntennaKind.DAS:
        if s.gnbs != 1:
            raise ConfigError("the DAS option is served by exactly one gNodeB")
        a = config.antennas
        das = DasLayout(tuple(grid_centers(*DAS_GRID, *floor, c.gnb_height_hbs)),
                        s.das_tx_power_dbm, s.das_noise_figure_db, a.das_tilt_deg,
                        a.das_gain_dbi, a.das_hpbw_deg)
        positions = [(floor[0] / 2, floor[1] / 2, c.gnb_height_hbs)]
        nf = s.das_noise_figure_db
    else:
        if s.gnbs in GRID_SHAPES:
            positions = place_gnbs(s.gnbs, floor, c.gnb_height_hbs)
        elif s.allow_any_count:
            positions = _any_count_layout(s.gnbs, floor, c.gnb_height_hbs)
        else:
            raise ConfigError(f"unsupported gNodeB count {s.gnbs}")
        nf = s.gnb_noise_figure_db
    gnbs = tuple(GnbSite(p, kind, s.gnb_tx_power_dbm, nf) for p in positions)
    return FactoryScenario(s.floor_length, s.floor_width, s.floor_height, clutter, gnbs, kind, das,
                           c.ue_height_hut, s.carrier_ghz, s.bandwidth_mhz, s.scs_khz)
