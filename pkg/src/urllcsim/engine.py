"""System-level URLLC evaluation.

A *drop* places UEs on the floor and draws the large-scale channel towards
every radiating point. For a given offered load the per-cell utilisations
are found as the least fixed point of the load map: each interfering cell
is active in a TTI with probability equal to its utilisation, every UE picks
the MCS that meets the reliability target within its attempt budget at the
lowest PRB cost (PRBs times expected transmissions), and the resulting PRB demand sets the
next utilisation estimate. Service capacity is the largest offered load at
which every UE of every drop is served, found by bisection.
"""
from __future__ import annotations

import dataclasses
import itertools
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property, lru_cache
from typing import Literal, Sequence

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import gammainc

from . import antenna as ant
from .antenna import AntennaKind, BeamArray
from .config import RunConfig
from .latency import ProcessingDelays, TddPattern, feasible_attempts
from .linkmodel import (FADING_STEP_DB, LinkAbstraction, McsEntry, ReliabilityCurves, combined_cdf,
                        combining_shift)
from .reliability import conditional_p2_from_cumulative, dl_reliability, ul_reliability
from .propagation import ChannelConstants, large_scale
from .scenario import FactoryScenario, UeDrop, build_scenario, drop_ues

log = logging.getLogger(__name__)

Direction = Literal["DL", "UL"]
DIRECTIONS: tuple[Direction, Direction] = ("DL", "UL")
THERMAL_DBM_HZ = -174.0


def db2lin(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def lin2db(x):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(x)


def noise_power_per_prb_dbm(noise_figure_db: float, scs_khz: float = 30.0) -> float:
    return THERMAL_DBM_HZ + 10.0 * math.log10(12 * scs_khz * 1e3) + noise_figure_db


@dataclass(frozen=True)
class PowerControlParams:
    snr_target_db: float = 10.0
    alpha: float = 0.8
    p_max_dbm: float = 23.0
    reference_pathloss_db: float = 100.0
    noise_figure_db: float = 5.0
    scs_khz: float = 30.0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")

    @property
    def p0_dbm(self) -> float:
        """Nominal per-PRB power; a UE at the reference pathloss lands exactly on target."""
        return (self.snr_target_db + noise_power_per_prb_dbm(self.noise_figure_db, self.scs_khz)
                + (1.0 - self.alpha) * self.reference_pathloss_db)


def ul_tx_power(pathloss_db, pc: PowerControlParams, prbs: int = 1):
    """Open-loop fractional power control, total power over ``prbs`` PRBs [dBm]."""
    if prbs < 1:
        raise ValueError("prbs must be >= 1")
    p = np.minimum(pc.p_max_dbm, pc.p0_dbm + 10.0 * math.log10(prbs) + pc.alpha * np.asarray(pathloss_db, dtype=float))
    return float(p) if np.ndim(p) == 0 else p


class LimitingReason(str, Enum):
    NONE = "none"
    BIT_RATE_FLOOR = "bit_rate_floor"
    RESOURCE_SHORTAGE = "resource_shortage"


@dataclass
class CellLoadState:
    utilization: dict[str, np.ndarray]   # direction -> (n_cells,)
    converged: dict[str, bool]
    iterations: dict[str, int] = field(default_factory=dict)


@dataclass
class QosVerdict:
    dl_ok: np.ndarray
    ul_ok: np.ndarray
    dl_reason: np.ndarray
    ul_reason: np.ndarray

    @property
    def served(self) -> np.ndarray:
        return self.dl_ok & self.ul_ok

    @property
    def limiting_reason(self) -> np.ndarray:
        out = np.where(self.dl_reason != LimitingReason.NONE.value, self.dl_reason, self.ul_reason)
        return out


@dataclass
class CapacityResult:
    scenario_id: str
    gnb_count: int
    antenna_kind: str
    latency_bound_ms: float
    max_offered: float                 # Mbps per direction
    limiting_direction: str
    capacity_per_direction: dict[str, float]
    utilization_at_capacity: dict[str, float]
    availability_curve: list[tuple[float, float]]
    brackets: dict[str, tuple[float, float]]
    diagnostic: str = ""

    def to_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "gnb_count": self.gnb_count,
            "antenna_kind": self.antenna_kind,
            "latency_bound_ms": self.latency_bound_ms,
            "max_offered_mbps": self.max_offered,
            "limiting_direction": self.limiting_direction,
            "capacity_per_direction_mbps": self.capacity_per_direction,
            "utilization_at_capacity": self.utilization_at_capacity,
            "availability_curve": [list(p) for p in self.availability_curve],
            "brackets": {k: list(v) for k, v in self.brackets.items()},
            "diagnostic": self.diagnostic,
        }


@dataclass
class LinkSet:
    """Load-independent per-direction quantities of one drop (linear mW per PRB)."""
    signal: np.ndarray           # (U,)
    noise: float
    interference: np.ndarray     # (U, C) power from cell j when active; own cell is 0

    def snr_db(self) -> np.ndarray:
        return lin2db(self.signal / self.noise)


@dataclass
class Snapshot:
    index: int
    drop: UeDrop
    serving: np.ndarray           # (U,) serving cell
    n_cells: int
    links: dict[str, LinkSet]
    coupling_loss_db: np.ndarray  # (U,) towards the serving cell, incl. antenna gains

    @cached_property
    def members(self) -> list[np.ndarray]:
        return [np.nonzero(self.serving == c)[0] for c in range(self.n_cells)]


def _sinr(link: LinkSet, active: np.ndarray, extra=0.0) -> np.ndarray:
    return link.signal / (link.noise + extra + link.interference @ active.astype(float))


def snapshot_sinr(snapshot: Snapshot, interference_state: Sequence[bool], direction: Direction) -> np.ndarray:
    """Per-UE linear SINR with exactly the cells flagged in ``interference_state`` transmitting."""
    active = np.asarray(interference_state, dtype=bool)
    if active.shape != (snapshot.n_cells,):
        raise ValueError(f"need one activity flag per cell ({snapshot.n_cells})")
    return _sinr(snapshot.links[direction], active)


class _StateSpace:
    """Enumerated interference states of one drop and direction.

    The strongest ``k`` interferers of each UE are enumerated exactly
    (2**k states); the remaining ones contribute their mean power
    ``rho_j * I_j``.
    """

    def __init__(self, link: LinkSet, k: int):
        n_cells = link.interference.shape[1]
        self.k = min(k, max(n_cells - 1, 0))
        order = np.argsort(-link.interference, axis=1, kind="stable")
        self.top = order[:, : self.k]                                     # (U, k)
        self.i_top = np.take_along_axis(link.interference, self.top, axis=1)
        self.bits = ((np.arange(2 ** self.k)[:, None] >> np.arange(self.k)[None, :]) & 1).astype(bool)
        self.i_states = self.i_top @ self.bits.T.astype(float)            # (U, S)
        self.link = link
        self.has_residual = n_cells - 1 > self.k
        self._fixed_idx = None

    def probabilities(self, rho: np.ndarray) -> np.ndarray:
        r = rho[self.top]                                                 # (U, k)
        p = np.ones((r.shape[0], self.bits.shape[0]))
        for j in range(self.k):
            p *= np.where(self.bits[None, :, j], r[:, j : j + 1], 1.0 - r[:, j : j + 1])
        return p

    def sinr_index(self, rho: np.ndarray, curves: ReliabilityCurves) -> np.ndarray:
        if not self.has_residual:
            if self._fixed_idx is None:
                self._fixed_idx = curves.index(self._sinr_db(0.0))
            return self._fixed_idx
        resid = self.link.interference @ rho - (self.i_top * rho[self.top]).sum(axis=1)
        return curves.index(self._sinr_db(np.maximum(resid, 0.0)[:, None]))

    def _sinr_db(self, resid) -> np.ndarray:
        s = self.link.signal[:, None]
        return lin2db(s / (self.link.noise + resid + self.i_states))


def attempt_mixture(curves: ReliabilityCurves, idx: np.ndarray, p: np.ndarray):
    """Failure probability and mean transmissions per UE and MCS.

    Every attempt draws its interference state independently from the per-UE
    state distribution (grid indices ``idx`` with masses ``p``, both (U, S))
    and fades independently. Returns (fail, tx), each (U, M).
    """
    rows, n_grid = idx.shape[0], curves.grid_db.size
    p1 = (p * curves.p1[idx]).sum(axis=1)
    b1 = np.einsum("us,mus->um", p, curves.base[:, idx])
    if curves.n_attempts == 1:
        cum = b1[..., None]
    else:
        lo, hi = int(idx.min()), int(idx.max()) + 1
        hist = np.zeros((rows, hi - lo))
        np.add.at(hist, (np.repeat(np.arange(rows), idx.shape[1]), (idx - lo).ravel()), p.ravel())
        faded = np.clip(fftconvolve(hist, curves.fade_mass[None, :], axes=1), 0.0, None)
        below = curves.fade_below
        # per-attempt CDF on the faded-SNR grid, padded: index 0 is "below", last is 1
        cdf = np.concatenate([np.full((rows, 1), below), below + np.cumsum(faded, axis=1),
                              np.ones((rows, 1))], axis=1)
        w0, w1 = curves.window
        t = np.arange(w0 - 1, w1) - lo                     # faded-grid positions of the window
        look = curves.awgn[:, w0:w1].T                     # (W, M)
        cum = [b1]
        for k, shift in enumerate(curves.shifts[1:], start=2):
            f = cdf[:, np.clip(t + 1, 0, cdf.shape[1] - 1)]
            lag = cdf[:, np.clip(t + 1 - shift, 0, cdf.shape[1] - 1)]
            h = combined_cdf(f, lag, k)
            cum.append(h[:, :1] + np.clip(np.diff(h, axis=1), 0.0, None) @ look)
        cum = np.stack(cum, axis=-1)
    cum = np.clip(cum, 0.0, 1.0)                                             # (U, M, N)
    rel = curves.combine(np.broadcast_to(p1[:, None], cum.shape[:2]), cum)
    return np.clip(1.0 - rel, 0.0, 1.0), 1.0 + cum[..., :-1].sum(axis=-1)


@dataclass
class DirectionOutcome:
    mcs_index: np.ndarray        # (U,) index into curves.mcs, -1 for none
    transmissions: np.ndarray    # (U,) expected data transmissions per packet
    demand: np.ndarray           # (U,) PRB*TTI per second
    load: np.ndarray             # (C,) uncapped utilisation
    rho: np.ndarray              # (C,) converged activity probabilities (capped at 1)
    converged: bool
    iterations: int


class Simulator:
    """Evaluates one deployment (scenario + config) over a fixed set of drops."""

    def __init__(self, config: RunConfig, scenario: FactoryScenario | None = None):
        self.config = config.validate()
        self.scenario = scenario or build_scenario(config)
        s = config.scenario
        lk = config.link
        self.link = LinkAbstraction(payload_bits=8 * lk.payload_bytes, tti_symbols=lk.tti_symbols,
                                    n_prb_total=s.n_prb, loss_base_db=lk.loss_base_db,
                                    loss_slope_db=lk.loss_slope_db,
                                    pdcch_payload_bits=lk.pdcch_payload_bits,
                                    pdcch_blocklength=lk.pdcch_blocklength,
                                    p3_nack_detect=lk.p3_nack_detect, p4_dtx_detect=lk.p4_dtx_detect,
                                    fading_order=lk.fading_order_dl)
        # the gNodeB receiver has more diversity branches than the UE
        self.links = {"DL": self.link, "UL": dataclasses.replace(self.link, fading_order=lk.fading_order_ul)}
        lat = config.latency
        self.pattern = TddPattern(tuple(lat.tdd_pattern), lk.tti_symbols, s.scs_khz)
        self.delays = ProcessingDelays(lat.alignment_worst_ms, lat.rx_processing_ms, lat.harq_rtt_ms)
        self.attempts = {d: feasible_attempts(self.pattern, self.delays, lat.bound_ms, d) for d in DIRECTIONS}
        self.target = config.simulation.reliability_target
        self.curves = {d: _curves(self.links[d], max(self.attempts[d], 1), d) for d in DIRECTIONS}
        self.budget = {d: s.n_prb * self.pattern.sub_slots_per_second(d) for d in DIRECTIONS}
        rx_nf = s.das_noise_figure_db if self.scenario.das is not None else s.gnb_noise_figure_db
        pc = config.power_control
        self.pc = PowerControlParams(pc.snr_target_db, pc.alpha, pc.p_max_dbm, pc.reference_pathloss_db,
                                     rx_nf, s.scs_khz)
        a = config.antennas
        self.array = BeamArray(a.bf_rows, a.bf_cols, a.bf_polarizations,
                               ant.ElementPattern(a.bf_element_gain_dbi, a.bf_element_hpbw_deg,
                                                  a.bf_element_hpbw_deg, a.a_max_db, tuple(ant.DOWN)),
                               a.bf_spacing_wavelengths)
        self.channel = ChannelConstants(config.channel.sigma_los_db, config.channel.sigma_nlos_db,
                                        min_distance_m=config.channel.min_distance_m)
        sim = config.simulation
        self._seeds = np.random.SeedSequence(sim.seed).spawn(sim.drops)
        self._snapshots: list[Snapshot] | None = None
        self._spaces: dict[tuple[int, str], _StateSpace] = {}
        self._warm: dict[tuple[int, str], tuple[float, np.ndarray]] = {}

    # ------------------------------------------------------------------ drops
    @property
    def snapshots(self) -> list[Snapshot]:
        if self._snapshots is None:
            self._snapshots = [self._build_snapshot(i) for i in range(len(self._seeds))]
        return self._snapshots

    def _pattern_for(self, kind: AntennaKind) -> ant.ElementPattern:
        a = self.config.antennas
        if kind is AntennaKind.OMNI:
            return ant.ElementPattern(a.omni_gain_dbi, 360.0, a.omni_hpbw_el_deg, a.a_max_db, omni=True)
        if kind is AntennaKind.DIRECTIONAL:
            p = ant.directional_pattern(a.dir_gain_dbi, a.dir_hpbw_deg, a.dir_downtilt_deg)
            return ant.ElementPattern(p.peak_gain, p.hpbw_az, p.hpbw_el, a.a_max_db, p.boresight)
        if kind is AntennaKind.DAS:
            return ant.ElementPattern(a.das_gain_dbi, 360.0, a.das_hpbw_deg, a.a_max_db, omni=True,
                                      tilt_deg=a.das_tilt_deg)
        return self.array.element

    def _build_snapshot(self, index: int) -> Snapshot:
        sc, cfg = self.scenario, self.config
        ue_seed, ch_seed = self._seeds[index].spawn(2)
        drop = drop_ues(cfg.simulation.ues_per_drop, ue_seed, (sc.floor_length, sc.floor_width), sc.ue_height)
        ue = drop.positions
        kind = sc.antenna_kind
        if sc.das is not None:
            tx = np.asarray(sc.das.antenna_positions, dtype=float)
            tx_dbm = np.full(len(tx), sc.das.per_antenna_tx_power_dbm)
            cell_of_tx = np.zeros(len(tx), dtype=int)
        else:
            tx = np.asarray([g.position for g in sc.gnbs], dtype=float)
            tx_dbm = np.asarray([g.tx_power_dbm for g in sc.gnbs])
            cell_of_tx = np.arange(len(tx))
        n_cells = sc.n_cells
        rng = np.random.default_rng(ch_seed)
        _, _, _, pl, sh = large_scale(tx, ue, sc.carrier_ghz, sc.clutter, rng, self.channel)
        loss = db2lin(-(pl + sh))                                             # (P, U)
        dirs = ue[None, :, :] - tx[:, None, :]
        dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
        pattern = self._pattern_for(kind)
        g_elem = db2lin(pattern.gain(dirs))                                   # (P, U)
        gl = g_elem * loss                                                    # element-level coupling

        if kind is AntennaKind.BEAMFORMED:
            arr = self.array
            w = ant.beam_weights(arr, dirs)                                   # (C, U, K)
            a = arr.response(dirs)                                            # (C, U, K)
            af = np.abs(np.einsum("cvk,cuk->cvu", w, a)) ** 2                 # beam towards v seen at u
            pol = db2lin(arr.polarization_gain_db)
            serve_gain = gl * arr.n_spatial * pol                             # steered beam incl. polarisation
        else:
            af = None
            serve_gain = gl
        # per cell combining (DAS sums its antennas)
        cell_gain = np.zeros((n_cells, len(ue)))
        np.add.at(cell_gain, cell_of_tx, serve_gain)
        serving = np.argmax(cell_gain, axis=0)
        u_idx = np.arange(len(ue))
        g_serv = cell_gain[serving, u_idx]
        members = np.eye(n_cells, dtype=bool)[serving]                       # (U, C)
        counts = members.sum(axis=0)
        mean_w = np.where(counts > 0, 1.0 / np.maximum(counts, 1), 0.0)

        s = cfg.scenario
        n_prb = s.n_prb
        # DL
        prb_mw = db2lin(tx_dbm) / n_prb
        dl_noise = float(db2lin(noise_power_per_prb_dbm(s.ue_noise_figure_db, s.scs_khz)))
        cell_prb_mw = np.zeros(n_cells)
        np.maximum.at(cell_prb_mw, cell_of_tx, prb_mw)
        if sc.das is not None:
            dl_sig = ant.das_combine_dl((prb_mw[:, None] * serve_gain).T)
        else:
            dl_sig = cell_prb_mw[serving] * g_serv
        if af is not None:
            # interfering beam aimed at a uniformly chosen own UE: average power over its UEs
            mean_af = np.einsum("cvu,vc->cu", af, members * mean_w[None, :])
            dl_int = (cell_prb_mw[:, None] * gl * mean_af).T
        else:
            per_cell = np.zeros((n_cells, len(ue)))
            np.add.at(per_cell, cell_of_tx, prb_mw[:, None] * gl)
            dl_int = per_cell.T.copy()
        dl_int[u_idx, serving] = 0.0

        # UL: fractional power control on the loss a UE measures from the cell-wide
        # reference signal: element pattern included, UE-specific beam gain not
        cell_gl = np.zeros((n_cells, len(ue)))
        np.add.at(cell_gl, cell_of_tx, gl)
        pl_db = -lin2db(cell_gl[serving, u_idx])
        prbs_ref = self.link.prbs_required(min(self.link.mcs_table))
        psd_dbm = ul_tx_power(pl_db, self.pc, prbs_ref) - 10.0 * math.log10(prbs_ref)
        psd = db2lin(psd_dbm)
        ul_noise = float(db2lin(noise_power_per_prb_dbm(self.pc.noise_figure_db, s.scs_khz)))
        ul_sig = psd * g_serv
        if af is not None:
            # victim cell receives through the beam steered at the victim UE
            t = af[serving, u_idx, :] * (psd[None, :] * gl[serving, :])        # (U_victim, U_interferer)
            ul_int = t @ (members * mean_w[None, :])
        else:
            per_cell_rx = np.zeros((n_cells, len(ue)))
            np.add.at(per_cell_rx, cell_of_tx, gl)
            m = (per_cell_rx * psd[None, :]) @ (members * mean_w[None, :])  # (C_victim, C_interferer)
            ul_int = m[serving, :]
        ul_int = np.array(ul_int, dtype=float)
        ul_int[u_idx, serving] = 0.0

        links = {"DL": LinkSet(dl_sig, dl_noise, dl_int), "UL": LinkSet(ul_sig, ul_noise, ul_int)}
        return Snapshot(index, drop, serving, n_cells, links, -lin2db(g_serv))

    # ------------------------------------------------------------- load map
    def _space(self, snap: Snapshot, direction: Direction) -> _StateSpace:
        key = (snap.index, direction)
        if key not in self._spaces:
            self._spaces[key] = _StateSpace(snap.links[direction],
                                            self.config.simulation.max_enumerated_interferers)
        return self._spaces[key]

    def _choose(self, snap: Snapshot, direction: Direction, rho: np.ndarray):
        curves = self.curves[direction]
        space = self._space(snap, direction)
        p = space.probabilities(rho)
        idx = space.sinr_index(rho, curves)
        n_mcs = len(curves.mcs)
        allowed = curves.prbs <= self.link.n_prb_total
        chosen = np.full(p.shape[0], -1)
        if self.attempts[direction] < 1:
            return chosen, np.ones(p.shape[0]), idx, p
        eps = 1.0 - self.target
        fail, m_tx = attempt_mixture(curves, idx, p)
        if self.attempts[direction] == 1:
            m_tx = np.ones_like(m_tx)
        # cheapest feasible MCS in PRB-transmissions; ties go to the higher SE
        cost = np.where((fail <= eps * (1.0 + 1e-9)) & allowed[None, :], curves.prbs[None, :] * m_tx, np.inf)
        rev = cost[:, ::-1]
        pick = n_mcs - 1 - np.argmin(rev, axis=1)
        got = np.isfinite(cost.min(axis=1))
        chosen[got] = pick[got]
        tx = np.where(got, m_tx[np.arange(len(pick)), pick], 1.0)
        return chosen, tx, idx, p

    def _demand(self, chosen, tx, rate_pps: float, direction: Direction):
        curves = self.curves[direction]
        prbs = np.where(chosen >= 0, curves.prbs[np.maximum(chosen, 0)], curves.prbs.max())
        return rate_pps * prbs * tx

    def _load(self, snap: Snapshot, demand: np.ndarray, direction: Direction) -> np.ndarray:
        return np.bincount(snap.serving, weights=demand, minlength=snap.n_cells) / self.budget[direction]

    def packet_rate(self, offered_mbps: float) -> float:
        """Packets per second per UE in one direction."""
        return offered_mbps * 1e6 / self.link.payload_bits / self.config.simulation.ues_per_drop

    def solve_drop(self, snap: Snapshot, offered_mbps: float, direction: Direction,
                   rho0: np.ndarray | None = None) -> DirectionOutcome:
        """Least fixed point of the load map for one drop, starting from ``rho0`` (default 0)."""
        sim = self.config.simulation
        rate = self.packet_rate(offered_mbps)
        rho = np.zeros(snap.n_cells) if rho0 is None else np.minimum(rho0.copy(), 1.0)
        converged = False
        it = 0
        for it in range(1, sim.fixed_point_max_iter + 1):
            chosen, tx, _, _ = self._choose(snap, direction, rho)
            demand = self._demand(chosen, tx, rate, direction)
            load = self._load(snap, demand, direction)
            new = np.minimum(np.maximum(load, rho if rho0 is not None else 0.0), 1.0)
            delta = np.max(np.abs(new - rho)) if new.size else 0.0
            rho = new
            if delta < sim.fixed_point_tol:
                converged = True
                break
        chosen, tx, _, _ = self._choose(snap, direction, rho)
        demand = self._demand(chosen, tx, rate, direction)
        load = self._load(snap, demand, direction)
        return DirectionOutcome(chosen, tx, demand, load, rho, converged, it)

    def verdict(self, snap: Snapshot, out: DirectionOutcome, direction: Direction) -> tuple[np.ndarray, np.ndarray]:
        no_mcs = out.mcs_index < 0
        short = (out.load > 1.0 + 1e-12)[snap.serving] | (not out.converged)
        ok = ~no_mcs & ~short
        reason = np.where(no_mcs, LimitingReason.BIT_RATE_FLOOR.value,
                          np.where(short, LimitingReason.RESOURCE_SHORTAGE.value, LimitingReason.NONE.value))
        return ok, reason

    def _map(self, fn, items):
        workers = self.config.simulation.workers
        if workers <= 1:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))

    def evaluate(self, offered_mbps: float, directions: Sequence[Direction] = DIRECTIONS,
                 warm: bool = False) -> dict[str, list[DirectionOutcome]]:
        """Converged load state of every drop at ``offered_mbps`` per direction."""
        snaps = self.snapshots
        result = {}
        for d in directions:
            def run(snap, d=d):
                rho0 = self._warm_start(snap.index, d, offered_mbps) if warm else None
                return self.solve_drop(snap, offered_mbps, d, rho0)
            result[d] = self._map(run, snaps)
        return result

    def _warm_start(self, index: int, direction: Direction, offered: float):
        hit = self._warm.get((index, direction))
        if hit is not None and hit[0] <= offered:
            return hit[1]
        return None

    def availability(self, offered_mbps: float, direction: Direction | None = None) -> float:
        """Percentage of UE locations (all drops) served at ``offered_mbps``."""
        dirs = DIRECTIONS if direction is None else (direction,)
        outs = self.evaluate(offered_mbps, dirs)
        ok = None
        for d in dirs:
            flags = np.concatenate([self.verdict(s, o, d)[0] for s, o in zip(self.snapshots, outs[d])])
            ok = flags if ok is None else ok & flags
        return 100.0 * math.fsum(ok.astype(float)) / ok.size

    def qos(self, offered_mbps: float) -> tuple[QosVerdict, dict[str, list[DirectionOutcome]]]:
        outs = self.evaluate(offered_mbps)
        parts = {d: [self.verdict(s, o, d) for s, o in zip(self.snapshots, outs[d])] for d in DIRECTIONS}
        cat = {d: (np.concatenate([p[0] for p in parts[d]]), np.concatenate([p[1] for p in parts[d]]))
               for d in DIRECTIONS}
        return QosVerdict(cat["DL"][0], cat["UL"][0], cat["DL"][1], cat["UL"][1]), outs

    def _served_fraction(self, offered: float, direction: Direction) -> tuple[float, list[DirectionOutcome]]:
        snaps = self.snapshots

        def run(snap):
            rho0 = self._warm_start(snap.index, direction, offered)
            out = self.solve_drop(snap, offered, direction, rho0)
            return out, self.verdict(snap, out, direction)[0]

        res = self._map(run, snaps)
        flags = np.concatenate([r[1] for r in res])
        avail = 100.0 * math.fsum(flags.astype(float)) / flags.size
        if flags.all():
            for snap, (out, _) in zip(snaps, res):
                self._warm[(snap.index, direction)] = (offered, out.rho)
        return avail, [r[0] for r in res]

    # -------------------------------------------------------------- capacity
    def capacity_direction(self, direction: Direction):
        """Bisection for the largest offered load served everywhere in one direction.

        Returns (capacity, (lo, hi), mean utilisation at capacity, curve).
        """
        cap = self.config.capacity
        self._warm = {k: v for k, v in self._warm.items() if k[1] != direction}
        curve: list[tuple[float, float]] = []
        lo, hi = 0.0, None
        lo_out = None
        x = cap.start_mbps
        avail, outs = self._served_fraction(x, direction)
        curve.append((x, avail))
        ok = avail >= 100.0
        if ok:
            lo, lo_out = x, outs
            while hi is None:
                x *= 2.0
                if x > cap.max_mbps:
                    hi = math.inf
                    break
                avail, outs = self._served_fraction(x, direction)
                curve.append((x, avail))
                ok = avail >= 100.0
                if ok:
                    lo, lo_out = x, outs
                else:
                    hi = x
        else:
            hi = x
            while lo == 0.0:
                x /= 2.0
                if x < cap.abs_tol_mbps:
                    break
                avail, outs = self._served_fraction(x, direction)
                curve.append((x, avail))
                ok = avail >= 100.0
                if ok:
                    lo, lo_out = x, outs
                else:
                    hi = x
        if math.isfinite(hi) and lo > 0.0:
            for _ in range(cap.max_iter):
                if hi - lo <= max(cap.rel_tol * lo, cap.abs_tol_mbps):
                    break
                mid = 0.5 * (lo + hi)
                avail, outs = self._served_fraction(mid, direction)
                curve.append((mid, avail))
                ok = avail >= 100.0
                if ok:
                    lo, lo_out = mid, outs
                else:
                    hi = mid
        util = float(np.mean([o.rho.mean() for o in lo_out])) if lo_out else 0.0
        return lo, (lo, hi), util, curve

    def capacity_search(self) -> CapacityResult:
        t0 = time.perf_counter()
        caps, brackets, utils, curve = {}, {}, {}, []
        for d in DIRECTIONS:
            c, br, u, cv = self.capacity_direction(d)
            caps[d], brackets[d], utils[d] = c, br, u
            curve.extend((x, d, a) for x, a in cv)
        limiting = min(DIRECTIONS, key=lambda d: (caps[d], d == "DL"))
        diag = ""
        if caps[limiting] == 0.0:
            diag = f"{limiting}: 100% availability not reached even at {self.config.capacity.abs_tol_mbps} Mbps"
        sc = self.scenario
        log.info("%s %.0fms: DL %.2f UL %.2f Mbps (%.1fs)", sc.scenario_id, self.config.latency.bound_ms,
                 caps["DL"], caps["UL"], time.perf_counter() - t0)
        avail_curve = sorted((x, a) for x, d, a in curve if d == limiting)
        return CapacityResult(sc.scenario_id, sc.n_cells, sc.antenna_kind.value, self.config.latency.bound_ms,
                              caps[limiting], limiting, caps, utils, avail_curve, brackets, diag)

    # ------------------------------------------------------------ per-UE view
    def ue_reliability(self, snap: Snapshot, ue: int, rho: np.ndarray, mcs: McsEntry,
                       direction: Direction, n_attempts: int | None = None, max_enumerated: int = 4) -> float:
        """Reliability of UE ``ue`` at ``mcs`` averaged over every interference state.

        Walks attempt-state sequences directly instead of using the lookup
        tables; interferers beyond ``max_enumerated`` contribute their mean power.
        """
        n = self.attempts[direction] if n_attempts is None else n_attempts
        return ue_reliability(snap.links[direction], ue, rho, mcs, n, direction, self.links[direction],
                              max_enumerated)


def sequence_reliability(model: LinkAbstraction, sinr_db, probs, mcs: McsEntry, n_attempts: int,
                         direction: Direction, step_db: float = FADING_STEP_DB) -> tuple[float, float]:
    """Reliability and mean data transmissions by walking every sequence of attempt states.

    Attempt i sees state ``s_i`` (SINR ``sinr_db[s_i]``, probability
    ``probs[s_i]``) drawn independently, and an independent Gamma power
    gain. For each sequence the combined gain max(best, k * worst) is built
    from the product of per-attempt CDFs evaluated with ``gammainc``. State
    SINRs snap down to the ``step_db`` grid and the combining lag is floored
    to whole steps. Cost grows as S**N; meant for checks, not for sweeps.
    """
    sinr_db = np.atleast_1d(np.asarray(sinr_db, dtype=float))
    probs = np.atleast_1d(np.asarray(probs, dtype=float))
    pos = np.floor(sinr_db / step_db + 1e-9).astype(int)
    m = model.fading_order
    span = int(round(30.0 / step_db)) if m > 0 else 0
    top = int(round(12.0 / step_db)) if m > 0 else 0
    t = np.arange(pos.min() - span - 1, pos.max() + top + combining_shift(n_attempts, step_db) + 2)

    def cdf(state, lag=0):
        rel = (t - lag - pos[state]) * step_db
        if m <= 0:
            return (rel >= 0).astype(float)
        return gammainc(m, m * 10 ** ((rel + step_db / 2) / 10))

    awgn = model.awgn_bler(10 ** (t * step_db / 10), mcs)
    cum = np.zeros(n_attempts)
    for k in range(1, n_attempts + 1):
        shift = combining_shift(k, step_db)
        for seq in itertools.product(range(sinr_db.size), repeat=k):
            w = float(np.prod(probs[list(seq)]))
            if w == 0.0:
                continue
            f = np.prod([cdf(s) for s in seq], axis=0)
            if k > 1:
                f = f - np.prod([cdf(s) - cdf(s, shift) for s in seq], axis=0)
            cum[k - 1] += w * (f[0] * awgn[0] + np.diff(f) @ awgn[1:])
    cum = np.clip(cum, 0.0, 1.0)
    p1 = float(probs @ model.pdcch_success(10 ** (pos * step_db / 10)))
    p2 = conditional_p2_from_cumulative(cum)
    inputs = (p1, p2, model.p3_nack_detect, model.p4_dtx_detect)
    rel = dl_reliability(inputs) if direction == "DL" else ul_reliability(inputs)
    return float(rel), float(1.0 + cum[:-1].sum())


def ue_reliability(link: LinkSet, ue: int, rho, mcs: McsEntry, n_attempts: int, direction: Direction,
                   model: LinkAbstraction, max_enumerated: int = 4) -> float:
    """Reliability of one UE from its own interference states, attempt sequence by sequence.

    The ``max_enumerated`` strongest interferers toggle independently per
    attempt; weaker ones add their mean power.
    """
    rho = np.asarray(rho, dtype=float)
    inter = link.interference[ue].copy()
    cells = np.nonzero(inter > 0)[0]
    cells = cells[np.argsort(-inter[cells], kind="stable")]
    top, rest = cells[:max_enumerated], cells[max_enumerated:]
    resid = float(inter[rest] @ rho[rest])
    bits = ((np.arange(2 ** len(top))[:, None] >> np.arange(len(top))[None, :]) & 1).astype(bool)
    probs = np.prod(np.where(bits, rho[top], 1.0 - rho[top]), axis=1)
    sinr = link.signal[ue] / (link.noise + resid + bits.astype(float) @ inter[top])
    return sequence_reliability(model, lin2db(sinr), probs, mcs, n_attempts, direction)[0]


@lru_cache(maxsize=64)
def _curves(link: LinkAbstraction, n_attempts: int, direction: Direction) -> ReliabilityCurves:
    return ReliabilityCurves(link, n_attempts, direction)


def cell_load_fixed_point(sim: Simulator, snap: Snapshot, offered_mbps: float) -> CellLoadState:
    outs = {d: sim.solve_drop(snap, offered_mbps, d) for d in DIRECTIONS}
    return CellLoadState({d: o.rho for d, o in outs.items()}, {d: o.converged for d, o in outs.items()},
                         {d: o.iterations for d, o in outs.items()})


def evaluate_availability(config: RunConfig, offered_mbps: float) -> float:
    return Simulator(config).availability(offered_mbps)


def capacity_search(config: RunConfig) -> CapacityResult:
    return Simulator(config).capacity_search()
