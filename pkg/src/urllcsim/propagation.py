"""Large-scale channel for the dense-clutter, high-antenna indoor factory.

Constants follow the 3GPP TR 38.901 InF-DH row and live in
``ChannelConstants`` so they can be corrected from configuration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ClutterParams:
    density_r: float = 0.6
    clutter_height_hc: float = 6.0
    clutter_size_dclutter: float = 2.0
    gnb_height_hbs: float = 8.0
    ue_height_hut: float = 1.5

    def __post_init__(self):
        if not 0.0 < self.density_r < 1.0:
            raise ValueError(f"clutter density must be in (0, 1), got {self.density_r}")
        if not self.ue_height_hut < self.clutter_height_hc < self.gnb_height_hbs:
            raise ValueError("need ue height < clutter height < gNodeB height")
        if self.clutter_size_dclutter <= 0:
            raise ValueError("clutter size must be positive")

    @property
    def k_subsce(self) -> float:
        """Decay distance of the LOS probability [m]."""
        return (-self.clutter_size_dclutter / math.log(1.0 - self.density_r)
                * (self.gnb_height_hbs - self.ue_height_hut)
                / (self.clutter_height_hc - self.ue_height_hut))


@dataclass(frozen=True)
class ChannelConstants:
    los_a: float = 31.84
    los_b: float = 21.50
    los_c: float = 19.00
    nlos_a: float = 33.63
    nlos_b: float = 21.9
    nlos_c: float = 20.0
    sigma_los_db: float = 4.3
    sigma_nlos_db: float = 4.0
    min_distance_m: float = 1.0


DEFAULT_CONSTANTS = ChannelConstants()


def los_probability(d2d, clutter: ClutterParams):
    d2d = np.asarray(d2d, dtype=float)
    if np.any(d2d < 0):
        raise ValueError("d2d must be non-negative")
    p = np.exp(-d2d / clutter.k_subsce)
    return float(p) if p.ndim == 0 else p


def pathloss(d3d, fc_ghz: float, los, consts: ChannelConstants = DEFAULT_CONSTANTS):
    """Pathloss in dB; distances below ``min_distance_m`` are clamped."""
    d = np.maximum(np.asarray(d3d, dtype=float), consts.min_distance_m)
    pl_los = consts.los_a + consts.los_b * np.log10(d) + consts.los_c * math.log10(fc_ghz)
    pl_nlos = consts.nlos_a + consts.nlos_b * np.log10(d) + consts.nlos_c * math.log10(fc_ghz)
    pl = np.where(np.asarray(los, dtype=bool), pl_los, np.maximum(pl_los, pl_nlos))
    return float(pl) if pl.ndim == 0 else pl


def sample_shadow(los, rng: np.random.Generator, consts: ChannelConstants = DEFAULT_CONSTANTS):
    los = np.asarray(los, dtype=bool)
    sigma = np.where(los, consts.sigma_los_db, consts.sigma_nlos_db)
    out = rng.standard_normal(los.shape) * sigma
    return float(out) if out.ndim == 0 else out


@dataclass
class RadioLink:
    tx_pos: np.ndarray
    rx_pos: np.ndarray
    d2d: float
    d3d: float
    los: bool
    pathloss: float
    shadow: float
    tx_antenna_gain: float = 0.0
    rx_antenna_gain: float = 0.0

    @property
    def coupling_gain(self) -> float:
        return -self.pathloss - self.shadow + self.tx_antenna_gain + self.rx_antenna_gain


def distances(tx, rx):
    """2-D and 3-D distances between every tx (rows) and rx (columns)."""
    tx = np.atleast_2d(np.asarray(tx, dtype=float))
    rx = np.atleast_2d(np.asarray(rx, dtype=float))
    diff = rx[None, :, :] - tx[:, None, :]
    d2d = np.hypot(diff[..., 0], diff[..., 1])
    d3d = np.sqrt(d2d ** 2 + diff[..., 2] ** 2)
    return d2d, d3d


def large_scale(tx, rx, fc_ghz: float, clutter: ClutterParams, rng: np.random.Generator,
                consts: ChannelConstants = DEFAULT_CONSTANTS):
    """LOS state, pathloss and shadowing for every (tx, rx) pair.

    LOS and shadowing are drawn independently per pair, once per snapshot.
    Returns ``(d2d, d3d, los, pathloss_db, shadow_db)`` arrays of shape
    (n_tx, n_rx).
    """
    d2d, d3d = distances(tx, rx)
    los = rng.random(d2d.shape) < los_probability(d2d, clutter)
    pl = pathloss(d3d, fc_ghz, los, consts)
    sh = sample_shadow(los, rng, consts)
    return d2d, d3d, los, np.asarray(pl), np.asarray(sh)


def link_budget(tx_pos, rx_pos, fc_ghz: float, clutter: ClutterParams, rng: np.random.Generator,
                tx_gain_db: float = 0.0, rx_gain_db: float = 0.0,
                consts: ChannelConstants = DEFAULT_CONSTANTS) -> RadioLink:
    d2d, d3d, los, pl, sh = large_scale(tx_pos, rx_pos, fc_ghz, clutter, rng, consts)
    return RadioLink(np.asarray(tx_pos, float), np.asarray(rx_pos, float),
                     float(d2d[0, 0]), float(d3d[0, 0]), bool(los[0, 0]),
                     float(pl[0, 0]), float(sh[0, 0]), tx_gain_db, rx_gain_db)
