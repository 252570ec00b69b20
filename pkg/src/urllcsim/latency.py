"""Worst-case one-way latency over a TDD sub-slot pattern.

The totals are the contract: with the default delay split an initial
transmission costs 0.93 ms and every HARQ retransmission adds 1.00 ms, in
both directions, for the DUDU 7-symbol pattern at 30 kHz.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

Direction = Literal["DL", "UL"]

# Latency sums are compared against bounds given with 0.01 ms granularity.
_EPS_MS = 1e-9


@dataclass(frozen=True)
class TddPattern:
    sub_slots: tuple[str, ...] = ("D", "U", "D", "U")
    symbols_per_sub_slot: int = 7
    scs_khz: float = 30.0

    def __post_init__(self):
        if not self.sub_slots or any(s not in ("D", "U") for s in self.sub_slots):
            raise ValueError(f"sub_slots must be a non-empty D/U sequence, got {self.sub_slots!r}")
        if self.symbols_per_sub_slot < 1:
            raise ValueError("symbols_per_sub_slot must be >= 1")

    @property
    def symbol_duration_ms(self) -> float:
        # 14 symbols per slot, slot = 1 ms at 15 kHz scaled by the numerology
        return 1.0 / (14.0 * self.scs_khz / 15.0)

    @property
    def sub_slot_duration_ms(self) -> float:
        return self.symbols_per_sub_slot * self.symbol_duration_ms

    @property
    def period_ms(self) -> float:
        return len(self.sub_slots) * self.sub_slot_duration_ms

    def sub_slots_per_second(self, direction: Direction) -> float:
        """Transmission opportunities (TTIs) per second in one direction."""
        key = "D" if direction == "DL" else "U"
        count = sum(1 for s in self.sub_slots if s == key)
        return count * 1000.0 / self.period_ms

    def max_gap_ms(self, direction: Direction) -> float:
        """Longest wait from an arbitrary instant to the start of the next
        sub-slot of ``direction`` (cyclic)."""
        key = "D" if direction == "DL" else "U"
        starts = [i for i, s in enumerate(self.sub_slots) if s == key]
        if not starts:
            raise ValueError(f"pattern has no {direction} sub-slots")
        n = len(self.sub_slots)
        gaps = [((starts[(k + 1) % len(starts)] - starts[k]) % n) or n for k in range(len(starts))]
        return max(gaps) * self.sub_slot_duration_ms


@dataclass(frozen=True)
class ProcessingDelays:
    """Delay split behind the worst-case totals (all in ms)."""
    alignment_worst: float = 0.50
    rx_processing: float = 0.18
    harq_rtt: float = 1.00


@dataclass(frozen=True)
class LatencyBudget:
    bound_ms: float
    n_attempts_dl: int
    n_attempts_ul: int

    def attempts(self, direction: Direction) -> int:
        return self.n_attempts_dl if direction == "DL" else self.n_attempts_ul


def worst_case_latency(pattern: TddPattern, delays: ProcessingDelays, attempts: int,
                       direction: Direction = "DL") -> float:
    """One-way latency in ms when ``attempts`` transmissions are needed and the
    packet arrives at the worst possible instant."""
    if attempts < 1:
        raise ValueError(f"attempts must be >= 1, got {attempts}")
    if direction not in ("DL", "UL"):
        raise ValueError(f"unknown direction {direction!r}")
    return (delays.alignment_worst + pattern.sub_slot_duration_ms + delays.rx_processing
            + (attempts - 1) * delays.harq_rtt)


def feasible_attempts(pattern: TddPattern, delays: ProcessingDelays, bound_ms: float,
                      direction: Direction = "DL", max_attempts: int = 32) -> int:
    """Largest N whose worst-case latency fits in ``bound_ms``; 0 if none does."""
    if bound_ms <= 0:
        raise ValueError("bound_ms must be positive")
    n = 0
    while n < max_attempts and worst_case_latency(pattern, delays, n + 1, direction) <= bound_ms + _EPS_MS:
        n += 1
    return n


def latency_budget(pattern: TddPattern, delays: ProcessingDelays, bound_ms: float) -> LatencyBudget:
    return LatencyBudget(bound_ms,
                         feasible_attempts(pattern, delays, bound_ms, "DL"),
                         feasible_attempts(pattern, delays, bound_ms, "UL"))


def latency_table(pattern: TddPattern | None = None, delays: ProcessingDelays | None = None,
                  max_attempts: int = 3) -> list[dict]:
    pattern = pattern or TddPattern()
    delays = delays or ProcessingDelays()
    return [
        {"attempts": k,
         "dl_ms": round(worst_case_latency(pattern, delays, k, "DL"), 6),
         "ul_ms": round(worst_case_latency(pattern, delays, k, "UL"), 6)}
        for k in range(1, max_attempts + 1)
    ]
