"""Analytical link abstraction.

Block errors follow the finite-blocklength normal approximation

    eps = Q((n C(g) - b + 0.5 log2 n) / sqrt(n V(g)))

with C the AWGN capacity and V the channel dispersion, both in bits. The
SNR is first reduced by an implementation loss that grows linearly with the
spectral efficiency of the MCS, standing in for the gap between Gaussian
signalling and practical QAM/LDPC.

Small-scale fading enters as a block-fading power gain G ~ Gamma(m, 1/m)
(Nakagami-m, unit mean), drawn afresh for every HARQ attempt since
retransmissions go out on different PRBs. A block then fails with probability
E_G[eps(G * snr)]; ``fading_order = 0`` switches fading off.

Chase combining adds the per-attempt SNRs. With fading the sum has no handy
law, so it is replaced by the lower bound max(best, k * worst) over the k
attempts, which is exact for equal SNRs and whose CDF follows from the
per-attempt CDF F as F(t)^k - (F(t) - F(t - 10 log10 k))^k (t in dB).
"""
from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Literal, Sequence

import numpy as np
from scipy.special import gammainc, ndtr

from .reliability import conditional_p2_from_cumulative, dl_reliability, ul_reliability

Direction = Literal["DL", "UL"]

LOG2E = math.log2(math.e)


@dataclass(frozen=True, order=True)
class McsEntry:
    spectral_efficiency: float
    modulation_order: int = field(compare=False)
    code_rate: Fraction = field(compare=False)

    @classmethod
    def of(cls, order: int, rate: Fraction | str) -> "McsEntry":
        rate = Fraction(rate)
        return cls(float(order * rate), order, rate)

    @property
    def name(self) -> str:
        mod = {2: "QPSK", 4: "16QAM", 6: "64QAM"}.get(self.modulation_order, f"M{self.modulation_order}")
        return f"{mod} {self.code_rate}"


MCS_TABLE: tuple[McsEntry, ...] = tuple(sorted(
    [McsEntry.of(2, r) for r in ("1/20", "1/10", "1/5", "1/3")]
    + [McsEntry.of(4, r) for r in ("1/3", "1/2", "2/3")]
    + [McsEntry.of(6, r) for r in ("2/3", "3/4")]
))


def qfunc(x):
    return ndtr(-np.asarray(x, dtype=float))


def capacity_bits(snr):
    return np.log2(1.0 + snr)


def dispersion_bits(snr):
    snr = np.asarray(snr, dtype=float)
    return snr * (snr + 2.0) / (snr + 1.0) ** 2 * LOG2E ** 2


def normal_approx_error(snr, n: float, info_bits):
    """Error probability of ``info_bits`` over ``n`` complex channel uses."""
    snr = np.maximum(np.asarray(snr, dtype=float), 1e-300)
    v = dispersion_bits(snr)
    num = n * capacity_bits(snr) - info_bits + 0.5 * math.log2(n)
    with np.errstate(divide="ignore"):
        arg = num / np.sqrt(n * v)
    return np.clip(qfunc(arg), 0.0, 1.0)


@dataclass(frozen=True)
class LinkAbstraction:
    payload_bits: int = 256
    tti_symbols: int = 7
    subcarriers_per_prb: int = 12
    n_prb_total: int = 273
    # implementation loss [dB] = loss_base_db + loss_slope_db * SE
    loss_base_db: float = 0.0
    loss_slope_db: float = 0.0
    pdcch_payload_bits: int = 40
    pdcch_blocklength: int = 864
    p3_nack_detect: float = 0.9999
    p4_dtx_detect: float = 0.99
    fading_order: float = 5.0
    mcs_table: tuple[McsEntry, ...] = MCS_TABLE

    @property
    def re_per_prb(self) -> int:
        return self.subcarriers_per_prb * self.tti_symbols

    def prbs_required(self, mcs: McsEntry, payload_bits: int | None = None) -> int:
        return prbs_required(self.payload_bits if payload_bits is None else payload_bits,
                             mcs, self.tti_symbols, self.subcarriers_per_prb)

    def blocklength(self, mcs: McsEntry) -> int:
        return self.prbs_required(mcs) * self.re_per_prb

    def impl_loss_db(self, se: float) -> float:
        return self.loss_base_db + self.loss_slope_db * se

    def _loss_lin(self, se: float) -> float:
        return 10 ** (self.impl_loss_db(se) / 10)

    @property
    def pdcch_se(self) -> float:
        return self.pdcch_payload_bits / self.pdcch_blocklength

    def awgn_bler(self, snr, mcs: McsEntry, blocklength: int | None = None):
        n = self.blocklength(mcs) if blocklength is None else blocklength
        if n < 1:
            raise ValueError("blocklength must be >= 1")
        eff = np.asarray(snr, dtype=float) / self._loss_lin(mcs.spectral_efficiency)
        return normal_approx_error(eff, n, n * mcs.spectral_efficiency)

    def bler(self, snr, mcs: McsEntry, blocklength: int | None = None):
        """Block error probability at mean linear ``snr`` for ``mcs``.

        The block carries ``n * SE`` bits over ``n`` channel uses, ``n``
        defaulting to the allocation needed for the payload in one TTI.
        """
        return self._fade(lambda x: self.awgn_bler(x, mcs, blocklength), snr)

    def pdcch_success(self, snr):
        """p1: PDCCH decoded, ``pdcch_payload_bits`` over ``pdcch_blocklength`` uses."""
        def err(x):
            eff = np.asarray(x, dtype=float) / self._loss_lin(self.pdcch_se)
            return normal_approx_error(eff, self.pdcch_blocklength, self.pdcch_payload_bits)
        return 1.0 - self._fade(err, snr)

    def _fade(self, awgn, snr):
        snr = np.asarray(snr, dtype=float)
        if self.fading_order <= 0:
            return awgn(snr)
        nodes_db, mass, below = fading_masses(self.fading_order)
        e = awgn(snr[..., None] * 10 ** (nodes_db / 10))
        out = below + e @ mass
        return np.clip(out, 0.0, 1.0)

    def bler_curve(self, grid_db: np.ndarray, mcs: McsEntry | None = None) -> np.ndarray:
        """Fading-averaged BLER of ``mcs`` (PDCCH when None) on a uniform dB grid.

        Same quantity as ``bler``/``pdcch_success`` but computed as one
        correlation of the AWGN curve with the fading masses.
        """
        step = float(grid_db[1] - grid_db[0])
        if mcs is None:
            def awgn(x):
                eff = x / self._loss_lin(self.pdcch_se)
                return normal_approx_error(eff, self.pdcch_blocklength, self.pdcch_payload_bits)
        else:
            def awgn(x):
                return self.awgn_bler(x, mcs)
        if self.fading_order <= 0:
            return awgn(10 ** (grid_db / 10))
        nodes_db, mass, below = fading_masses(self.fading_order, step)
        j0 = int(round(nodes_db[0] / step))
        ext = grid_db[0] + step * np.arange(j0, j0 + grid_db.size + nodes_db.size - 1)
        e = awgn(10 ** (ext / 10))
        out = below + np.correlate(e, mass, mode="valid")
        return np.clip(out, 0.0, 1.0)

    def cumulative_bler(self, snr, mcs: McsEntry, n_attempts: int):
        """Data BLER after k = 1..N combined receptions at per-attempt ``snr`` (last axis)."""
        snr = np.asarray(snr, dtype=float)
        out = []
        for k in range(1, n_attempts + 1):
            ext_db, dh, low = combining_law(self.fading_order, k)
            e = self.awgn_bler(snr[..., None] * 10 ** (ext_db / 10), mcs)
            out.append(low + e @ dh)
        return np.clip(np.stack(out, axis=-1), 0.0, 1.0)

    def total_reliability(self, snr, mcs: McsEntry, n_attempts: int, direction: Direction):
        cum = self.cumulative_bler(snr, mcs, n_attempts)
        p2 = conditional_p2_from_cumulative(cum)
        p1 = self.pdcch_success(snr)
        inputs = (p1, p2, self.p3_nack_detect, self.p4_dtx_detect)
        if direction == "DL":
            return dl_reliability(inputs, n_attempts)
        return ul_reliability(inputs, n_attempts)

    def expected_transmissions(self, snr, mcs: McsEntry, n_attempts: int):
        """Mean number of data transmissions spent on one packet.

        Attempt k+1 happens when the first k receptions failed; feedback
        errors are second-order here and ignored.
        """
        cum = self.cumulative_bler(snr, mcs, n_attempts)
        return 1.0 + cum[..., :-1].sum(axis=-1)


FADING_STEP_DB = 0.05


@lru_cache(maxsize=16)
def fading_masses(order: float, step_db: float = FADING_STEP_DB, lo_db: float = -30.0,
                  hi_db: float = 12.0) -> tuple[np.ndarray, np.ndarray, float]:
    """Discretised Gamma(order, 1/order) power gain on a dB grid.

    Returns node positions [dB], their probability masses and the mass
    left below the grid. The lower tail (about 3e-14 for order 5 at -30 dB)
    is folded into the lowest node so that faded BLERs keep falling with
    SNR instead of flooring at the tail mass; the mass below is then 0. A
    non-positive order means no fading: a single node at 0 dB.
    """
    if order <= 0:
        return np.zeros(1), np.ones(1), 0.0
    k_lo = int(math.floor(lo_db / step_db))
    k_hi = int(math.ceil(hi_db / step_db))
    nodes = step_db * np.arange(k_lo, k_hi + 1)
    edges = np.concatenate([nodes - step_db / 2, [nodes[-1] + step_db / 2]])
    cdf = gammainc(order, order * 10 ** (edges / 10))
    mass = np.diff(cdf)
    mass[0] += cdf[0]
    mass[-1] += 1.0 - cdf[-1]
    return nodes, mass, 0.0


def combining_shift(k: int, step_db: float) -> int:
    """10 log10 k in grid steps, rounded down."""
    return int(math.floor(10 * math.log10(k) / step_db + 1e-9))


def combined_cdf(cdf, lagged, k: int):
    """P(max(best, k * worst) <= t) over k i.i.d. attempts.

    ``cdf`` is the per-attempt P(X <= t) and ``lagged`` the same CDF at
    t - 10 log10 k.
    """
    if k == 1:
        return cdf
    return cdf ** k - np.clip(cdf - lagged, 0.0, None) ** k


def bounded_combining(cdf: np.ndarray, below, shift: int, k: int):
    """Masses of max(best, k * worst) over k i.i.d. attempts on a uniform dB grid.

    ``cdf`` holds P(X <= t_j) along the last axis (including the mass
    ``below`` the grid) and must already extend ``shift`` points past the
    support. Returns (masses per grid point, mass below the grid).
    """
    below = np.asarray(below, dtype=float)[..., None]
    lag = np.broadcast_to(below, cdf.shape[:-1] + (shift,))
    prev = np.concatenate([lag, cdf[..., : cdf.shape[-1] - shift]], axis=-1)
    h = combined_cdf(cdf, prev, k)
    low = below ** k
    dh = np.diff(h, axis=-1, prepend=low)
    return np.clip(dh, 0.0, None), low[..., 0]


@lru_cache(maxsize=64)
def combining_law(order: float, k: int, step_db: float = FADING_STEP_DB):
    """Law of the combined fading gain of k attempts relative to one attempt's SNR.

    Returns (grid [dB], masses, mass below the grid).
    """
    nodes, mass, below = fading_masses(order, step_db)
    shift = combining_shift(k, step_db)
    cdf = np.concatenate([below + np.cumsum(mass), np.ones(shift)])
    grid = nodes[0] + step_db * np.arange(cdf.size)
    dh, low = bounded_combining(cdf, below, shift, k)
    return grid, dh, float(low)


def prbs_required(payload_bits: int, mcs: McsEntry, tti_symbols: int = 7,
                  subcarriers_per_prb: int = 12) -> int:
    """PRBs needed to carry ``payload_bits`` in one TTI at the MCS spectral efficiency."""
    if payload_bits <= 0:
        raise ValueError("payload_bits must be positive")
    per_prb = mcs.spectral_efficiency * subcarriers_per_prb * tti_symbols
    # guard against 256/8.4 style float noise pushing an exact ratio up a PRB
    return max(1, math.ceil(payload_bits / per_prb - 1e-9))


def select_mcs(link: LinkAbstraction, sinr, n_attempts: int, target: float = 1 - 1e-5,
               direction: Direction = "DL", weights: Sequence[float] | None = None) -> McsEntry | None:
    """Highest-SE MCS whose total reliability meets ``target``.

    ``sinr`` is either a single linear SINR or a set of interference states
    with probabilities ``weights``; reliability is averaged over states.
    Returns None when even the most robust entry misses the target.
    """
    if n_attempts < 1:
        raise ValueError("n_attempts must be >= 1")
    sinr = np.atleast_1d(np.asarray(sinr, dtype=float))
    w = np.full(sinr.shape, 1.0 / sinr.size) if weights is None else np.asarray(weights, dtype=float)
    for mcs in sorted(link.mcs_table, reverse=True):
        if link.prbs_required(mcs) > link.n_prb_total:
            continue
        rel = float(np.dot(w, link.total_reliability(sinr, mcs, n_attempts, direction)))
        if rel >= target:
            return mcs
    return None


def spectral_efficiency(link: LinkAbstraction, sinr: float, n_attempts: int,
                        target: float = 1 - 1e-5, direction: Direction = "DL") -> float:
    mcs = select_mcs(link, sinr, n_attempts, target, direction)
    return 0.0 if mcs is None else mcs.spectral_efficiency


class ReliabilityCurves:
    """Per-MCS reliability tables on a fixed SINR grid.

    ``p1`` and ``base`` are the fading-averaged PDCCH success and single-attempt
    BLER per grid SINR; ``awgn`` is the unfaded BLER on the wider grid of faded
    SNRs (first point ``awgn_lo_db``), which callers combine with their own
    per-attempt laws. ``fail``/``tx`` give total failure probability and mean
    data transmissions when every attempt has the same mean SINR. SINR lookups
    snap to the grid point below so they never overstate reliability.
    """

    def __init__(self, link: LinkAbstraction, n_attempts: int, direction: Direction,
                 lo_db: float = -40.0, hi_db: float = 60.0, step_db: float = FADING_STEP_DB):
        self.link = link
        self.n_attempts = n_attempts
        self.direction = direction
        self.lo_db, self.step_db = lo_db, step_db
        self.grid_db = np.arange(lo_db, hi_db + step_db / 2, step_db)
        self.mcs = tuple(sorted(link.mcs_table))
        self.prbs = np.array([link.prbs_required(m) for m in self.mcs])
        self.shifts = np.array([combining_shift(k, step_db) for k in range(1, n_attempts + 1)])
        self.fade_nodes, self.fade_mass, self.fade_below = fading_masses(link.fading_order, step_db)
        self.p1 = 1.0 - link.bler_curve(self.grid_db)
        self.base = np.stack([link.bler_curve(self.grid_db, m) for m in self.mcs])

        self.awgn_lo_db = lo_db + self.fade_nodes[0]
        n_awgn = self.grid_db.size + self.fade_nodes.size - 1 + int(self.shifts[-1])
        snr = 10 ** ((self.awgn_lo_db + step_db * np.arange(n_awgn)) / 10)
        self.awgn = np.stack([link.awgn_bler(snr, m) for m in self.mcs])
        # outside [w0, w1) every MCS fails surely (left) or never (right)
        certain = np.all(self.awgn >= 1.0 - 1e-15, axis=0)
        never = np.all(self.awgn <= 1e-18, axis=0)
        self.window = (int(np.argmin(certain)), int(n_awgn - np.argmin(never[::-1])))

        cum = []
        for k in range(1, n_attempts + 1):
            _, dh, low = combining_law(link.fading_order, k, step_db)
            cum.append(np.stack([low + np.correlate(row, dh, mode="valid")[: self.grid_db.size]
                                 for row in self.awgn]))
        cum = np.clip(np.stack(cum, axis=-1), 0.0, 1.0)                   # (M, G, N)
        self.fail = np.clip(1.0 - self.combine(np.broadcast_to(self.p1, cum.shape[:2]), cum), 0.0, 1.0)
        self.tx = 1.0 + cum[..., :-1].sum(axis=-1)

    def combine(self, p1, cumulative):
        """Total reliability from PDCCH success and cumulative BLERs (attempt axis last)."""
        p2 = conditional_p2_from_cumulative(cumulative)
        inputs = (p1, p2, self.link.p3_nack_detect, self.link.p4_dtx_detect)
        if self.direction == "DL":
            return dl_reliability(inputs, self.n_attempts)
        return ul_reliability(inputs, self.n_attempts)

    def index(self, sinr_db):
        idx = np.floor((np.asarray(sinr_db) - self.lo_db) / self.step_db + 1e-9).astype(np.intp)
        return np.clip(idx, 0, self.grid_db.size - 1)

    def threshold_db(self, mcs_index: int, target: float = 1 - 1e-5) -> float:
        ok = np.nonzero(self.fail[mcs_index] <= 1.0 - target)[0]
        return float(self.grid_db[ok[0]]) if ok.size else math.inf


def threshold_snr_db(link: LinkAbstraction, mcs: McsEntry, n_attempts: int = 1,
                     target: float = 1 - 1e-5, direction: Direction = "DL",
                     lo_db: float = -40.0, hi_db: float = 60.0) -> float:
    """SNR in dB at which the total reliability reaches ``target`` (bisection)."""
    def ok(x_db):
        return link.total_reliability(10 ** (x_db / 10), mcs, n_attempts, direction) >= target
    if not ok(hi_db):
        return math.inf
    if ok(lo_db):
        return lo_db
    lo, hi = lo_db, hi_db
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if ok(mid) else (mid, hi)
    return hi


def threshold_table(link: LinkAbstraction, attempts: Sequence[int] = (1, 2, 3),
                    target: float = 1 - 1e-5) -> list[dict]:
    rows = []
    for mcs in sorted(link.mcs_table):
        row = {"mcs": mcs.name, "modulation_order": mcs.modulation_order,
               "code_rate": str(mcs.code_rate), "spectral_efficiency": mcs.spectral_efficiency,
               "prbs": link.prbs_required(mcs),
               "bler_snr_db": threshold_bler_db(link, mcs, 1.0 - target)}
        for n in attempts:
            for d in ("DL", "UL"):
                row[f"{d.lower()}_n{n}_snr_db"] = threshold_snr_db(link, mcs, n, target, d)
        rows.append(row)
    return rows


def threshold_bler_db(link: LinkAbstraction, mcs: McsEntry, eps: float) -> float:
    """SNR in dB where a single transmission's BLER equals ``eps`` (closed-form inversion is
    not available, so bisect on the monotone curve)."""
    lo, hi = -40.0, 60.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if link.bler(10 ** (mid / 10), mcs) <= eps:
            hi = mid
        else:
            lo = mid
    return hi
