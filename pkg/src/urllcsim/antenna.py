"""gNodeB antenna models: omni, downward sector, 4x4x2 beamformed panel, DAS.

Element patterns use the parabolic approximation
A = peak - min(12 (az/hpbw_az)^2 + 12 (el/hpbw_el)^2, A_max) in the
element's local frame. Directions are unit 3-vectors in the floor frame
(z up).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

DOWN = np.array([0.0, 0.0, -1.0])


class AntennaKind(str, Enum):
    OMNI = "omni"
    DIRECTIONAL = "dir"
    BEAMFORMED = "bf"
    DAS = "das"

    @classmethod
    def parse(cls, value: "str | AntennaKind") -> "AntennaKind":
        if isinstance(value, cls):
            return value
        aliases = {"omni": cls.OMNI, "dir": cls.DIRECTIONAL, "directional": cls.DIRECTIONAL,
                   "bf": cls.BEAMFORMED, "beamformed": cls.BEAMFORMED, "das": cls.DAS}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown antenna kind {value!r}; expected one of omni|dir|bf|das") from None


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _frame(boresight: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    b = _unit(boresight)
    ref = np.array([0.0, 0.0, 1.0]) if abs(b[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    u1 = _unit(np.cross(ref, b))
    u2 = np.cross(b, u1)
    return b, u1, u2


@dataclass(frozen=True)
class ElementPattern:
    peak_gain: float
    hpbw_az: float
    hpbw_el: float
    a_max: float = 30.0
    boresight: tuple[float, float, float] = (1.0, 0.0, 0.0)
    # azimuth-flat pattern: only the vertical cut shapes the gain
    omni: bool = False
    # omni only: electrical tilt below the horizon [deg]
    tilt_deg: float = 0.0

    def gain(self, direction) -> np.ndarray:
        d = _unit(direction)
        if self.omni:
            el = np.degrees(np.arcsin(np.clip(d[..., 2], -1.0, 1.0))) + self.tilt_deg
            att = np.minimum(12.0 * (el / self.hpbw_el) ** 2, self.a_max)
        else:
            b, u1, u2 = _frame(np.asarray(self.boresight, dtype=float))
            x, y, z = d @ b, d @ u1, d @ u2
            az = np.degrees(np.arctan2(y, x))
            el = np.degrees(np.arcsin(np.clip(z, -1.0, 1.0)))
            att = np.minimum(12.0 * (az / self.hpbw_az) ** 2 + 12.0 * (el / self.hpbw_el) ** 2, self.a_max)
        return self.peak_gain - att


def element_gain(pattern: ElementPattern, direction):
    g = pattern.gain(direction)
    return float(g) if np.ndim(g) == 0 else g


def omni_pattern(peak_gain: float = 2.0, hpbw_el: float = 80.0, tilt_deg: float = 0.0) -> ElementPattern:
    return ElementPattern(peak_gain, 360.0, hpbw_el, omni=True, tilt_deg=tilt_deg)


def directional_pattern(peak_gain: float = 6.0, hpbw: float = 90.0, downtilt_deg: float = 90.0) -> ElementPattern:
    t = math.radians(downtilt_deg)
    bore = (math.cos(t), 0.0, -math.sin(t))
    return ElementPattern(peak_gain, hpbw, hpbw, boresight=bore)


def das_pattern(peak_gain: float = 0.0, hpbw_el: float = 90.0, tilt_deg: float = 35.0) -> ElementPattern:
    return omni_pattern(peak_gain, hpbw_el, tilt_deg)


@dataclass(frozen=True)
class BeamArray:
    """Planar panel of ``rows x cols`` cross-polarised element pairs facing ``boresight``."""
    rows: int = 4
    cols: int = 4
    polarizations: int = 2
    element: ElementPattern = field(default_factory=lambda: ElementPattern(5.0, 90.0, 90.0, boresight=tuple(DOWN)))
    spacing: float = 0.5  # wavelengths

    @property
    def n_spatial(self) -> int:
        return self.rows * self.cols

    @property
    def polarization_gain_db(self) -> float:
        return 10.0 * math.log10(self.polarizations)

    def element_positions(self) -> np.ndarray:
        _, u1, u2 = _frame(np.asarray(self.element.boresight, dtype=float))
        r, c = np.meshgrid(np.arange(self.rows), np.arange(self.cols), indexing="ij")
        r = (r - (self.rows - 1) / 2).ravel() * self.spacing
        c = (c - (self.cols - 1) / 2).ravel() * self.spacing
        return r[:, None] * u1 + c[:, None] * u2

    def response(self, direction) -> np.ndarray:
        """Unit-modulus steering vectors, shape (..., n_spatial)."""
        d = _unit(direction)
        phase = 2.0 * np.pi * (d @ self.element_positions().T)
        return np.exp(1j * phase)


def beam_weights(array: BeamArray, serve_direction) -> np.ndarray:
    """Unit-norm conjugate of the array response toward ``serve_direction``.

    With a rank-one long-term channel covariance this is its dominant
    eigenvector, i.e. long-term wideband eigen-beamforming.
    """
    a = array.response(serve_direction)
    return np.conj(a) / np.linalg.norm(a, axis=-1, keepdims=True)


def array_factor(array: BeamArray, weights, eval_direction) -> np.ndarray:
    """|sum_k w_k a_k(eval)|^2 (linear power); weights (..., K), directions (..., 3)."""
    a = array.response(eval_direction)
    return np.abs(np.sum(np.asarray(weights) * a, axis=-1)) ** 2


def beam_gain(array: BeamArray, weights, eval_direction):
    """Per-polarisation gain [dBi] of the weighted panel toward ``eval_direction``."""
    af = array_factor(array, weights, eval_direction)
    g = array.element.gain(eval_direction) + 10.0 * np.log10(np.maximum(af, 1e-30))
    return float(g) if np.ndim(g) == 0 else g


def das_combine_dl(per_antenna_rx_power_mw) -> float:
    """Non-coherent simulcast: received powers add."""
    p = np.asarray(per_antenna_rx_power_mw, dtype=float)
    if np.any(p < 0):
        raise ValueError("powers must be non-negative")
    return float(p.sum(axis=-1)) if p.ndim == 1 else p.sum(axis=-1)


def das_combine_ul(per_antenna_snr) -> float:
    """Maximum-ratio combining over the DAS antennas: SNRs add."""
    s = np.asarray(per_antenna_snr, dtype=float)
    if np.any(s < 0):
        raise ValueError("SNRs must be non-negative")
    return float(s.sum(axis=-1)) if s.ndim == 1 else s.sum(axis=-1)


def pattern_cut(pattern: ElementPattern, plane: str = "vertical", step_deg: float = 1.0) -> np.ndarray:
    """Gain along a full circle through the boresight; rows of (angle_deg, gain_dbi)."""
    ang = np.arange(-180.0, 180.0 + step_deg / 2, step_deg)
    if pattern.omni:
        b, u2 = np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0])
    else:
        b, u1, u2 = _frame(np.asarray(pattern.boresight, dtype=float))
        if plane == "horizontal":
            u2 = u1
    r = np.radians(ang)
    dirs = np.cos(r)[:, None] * b + np.sin(r)[:, None] * u2
    return np.column_stack([ang, pattern.gain(dirs)])
