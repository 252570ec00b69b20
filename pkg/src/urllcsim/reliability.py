"""Total reliability of a HARQ transmission chain.

``dl_reliability`` combines PDCCH reception, soft-combined data decoding and
PUCCH feedback detection for a dynamically scheduled downlink transport
block. ``ul_reliability`` does the same for a configured-grant uplink, where
only the retransmissions need a grant. ``harq_oracle`` enumerates the full
event tree and is used to check both closed forms.

All combiners broadcast over leading array dimensions: ``p2`` carries the
attempt index in its last axis.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Literal, Sequence

import numpy as np

Mode = Literal["DL", "UL"]


@dataclass(frozen=True)
class ReliabilityInputs:
    """Per-attempt probabilities feeding the combiners.

    p1: PDCCH received. p2[k-1]: data decoded after k soft-combined
    receptions given the first k-1 failed. p3: NACK detected. p4: absent
    PUCCH (DTX) detected at the gNodeB.
    """
    p1: float
    p2: tuple[float, ...]
    p3: float
    p4: float

    def __post_init__(self):
        vals = (self.p1, self.p3, self.p4, *self.p2)
        if not self.p2:
            raise ValueError("p2 must hold at least one attempt")
        if any(not (0.0 <= v <= 1.0) for v in vals):
            raise ValueError(f"probabilities must lie in [0, 1]: {vals}")

    @property
    def n_attempts(self) -> int:
        return len(self.p2)


def _split(inputs):
    if isinstance(inputs, ReliabilityInputs):
        return inputs.p1, np.asarray(inputs.p2, dtype=float), inputs.p3, inputs.p4
    p1, p2, p3, p4 = inputs
    return p1, np.asarray(p2, dtype=float), p3, p4


def dl_reliability(inputs, n_attempts: int | None = None):
    """Downlink total reliability after at most ``n_attempts`` transmissions.

    ``inputs`` is a ReliabilityInputs or a ``(p1, p2, p3, p4)`` tuple whose
    entries may be arrays (``p2`` with the attempt axis last).
    """
    p1, p2, p3, p4 = _split(inputs)
    n_attempts = p2.shape[-1] if n_attempts is None else n_attempts
    if n_attempts < 1 or n_attempts > p2.shape[-1]:
        raise ValueError(f"n_attempts={n_attempts} incompatible with {p2.shape[-1]} p2 entries")
    p1 = np.asarray(p1, dtype=float)
    miss = (1.0 - p1) * np.asarray(p4, dtype=float)
    fail_step = (p1 * np.asarray(p3, dtype=float))[..., None] * (1.0 - p2)

    # prefix[i] = prod_{j<i} p1 p3 (1 - p2_j)
    prefix = [np.ones(np.broadcast(p1, p2[..., 0]).shape)]
    for j in range(n_attempts - 1):
        prefix.append(prefix[-1] * fail_step[..., j])

    total = np.zeros_like(prefix[0])
    for n in range(1, n_attempts + 1):
        for i in range(1, n + 1):
            total = total + (comb(n - 1, n - i) * miss ** (n - i)
                             * p1 * p2[..., i - 1] * prefix[i - 1])
    total = np.clip(total, 0.0, 1.0)
    return float(total) if total.ndim == 0 else total


def ul_reliability(inputs, n_attempts: int | None = None):
    """Configured-grant uplink total reliability; the first attempt needs no PDCCH."""
    p1, p2, _, _ = _split(inputs)
    n_attempts = p2.shape[-1] if n_attempts is None else n_attempts
    if n_attempts < 1 or n_attempts > p2.shape[-1]:
        raise ValueError(f"n_attempts={n_attempts} incompatible with {p2.shape[-1]} p2 entries")
    p1 = np.asarray(p1, dtype=float)
    first = p2[..., 0]
    tail = np.zeros(np.broadcast(p1, first).shape)
    running = np.ones_like(tail)
    for n in range(2, n_attempts + 1):
        tail = tail + p1 * p2[..., n - 1] * running
        running = running * (1.0 - p1 * p2[..., n - 1])
    total = np.clip(first + (1.0 - first) * tail, 0.0, 1.0)
    return float(total) if total.ndim == 0 else total


def conditional_p2_from_cumulative(cumulative_bler) -> np.ndarray:
    """Conditional per-attempt success from cumulative BLERs B_1..B_N.

    p2_1 = 1 - B_1 and p2_k = (B_{k-1} - B_k) / B_{k-1}; a zero B_{k-1}
    gives p2_k = 1.
    """
    b = np.asarray(cumulative_bler, dtype=float)
    out = np.empty_like(b)
    out[..., 0] = 1.0 - b[..., 0]
    if b.shape[-1] > 1:
        prev = b[..., :-1]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(prev > 0.0, (prev - b[..., 1:]) / np.where(prev > 0.0, prev, 1.0), 1.0)
        out[..., 1:] = ratio
    return np.clip(out, 0.0, 1.0)


def conditional_p2(per_attempt_snr, mcs, n_attempts: int, link=None) -> np.ndarray:
    """Conditional success probabilities p2_1..p2_N under chase combining.

    Without fading the k-th decode sees k times the per-attempt SNR; with
    fading ``link.cumulative_bler`` supplies the combined law.
    """
    from .linkmodel import LinkAbstraction

    link = link or LinkAbstraction()
    return conditional_p2_from_cumulative(link.cumulative_bler(per_attempt_snr, mcs, n_attempts))


def total_reliability(mode: Mode, inputs, n_attempts: int | None = None):
    if mode == "DL":
        return dl_reliability(inputs, n_attempts)
    if mode == "UL":
        return ul_reliability(inputs, n_attempts)
    raise ValueError(f"unknown mode {mode!r}")


def harq_oracle(inputs: ReliabilityInputs | Sequence, n_attempts: int, mode: Mode) -> float:
    """Exact success probability by walking every branch of the HARQ event tree.

    DL: each attempt branches on PDCCH reception. A received PDCCH is followed
    by a data decode whose success probability is indexed by the number of
    data receptions so far; a failed decode continues only if the NACK is
    detected. A missed PDCCH continues only if the gNodeB detects the absent
    PUCCH.

    UL (configured grant): the first attempt is sent without a PDCCH; each
    retransmission round needs its grant and then decodes with the
    probability indexed by the round number.
    """
    if isinstance(inputs, ReliabilityInputs):
        p1, p2, p3, p4 = inputs.p1, list(inputs.p2), inputs.p3, inputs.p4
    else:
        p1, p2, p3, p4 = inputs
        p2 = list(p2)
    if not 1 <= n_attempts <= min(len(p2), 8):
        raise ValueError("oracle supports 1 <= n_attempts <= min(len(p2), 8)")

    def dl(attempt: int, receptions: int) -> float:
        if attempt > n_attempts:
            return 0.0
        s = p2[receptions]
        got = p1 * (s + (1.0 - s) * p3 * dl(attempt + 1, receptions + 1))
        missed = (1.0 - p1) * p4 * dl(attempt + 1, receptions)
        return got + missed

    def ul(attempt: int) -> float:
        if attempt > n_attempts:
            return 0.0
        s = p2[attempt - 1]
        if attempt == 1:
            return s + (1.0 - s) * ul(2)
        return p1 * s + (1.0 - p1 * s) * ul(attempt + 1)

    if mode == "DL":
        return dl(1, 0)
    if mode == "UL":
        return ul(1)
    raise ValueError(f"unknown mode {mode!r}")
