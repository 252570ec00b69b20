"""CSV/JSON emitters, experiment manifests and optional PNG figures.

Every CSV goes through ``write_csv``: fixed column order, ``\\n`` line ends
and a fixed float format, so identical inputs give identical bytes. Figures
are rendered from the emitted CSV rows; matplotlib is imported only when a
figure is actually requested.
"""
from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__

CAPACITY_COLUMNS = ("gnb_count", "antenna_kind", "latency_bound", "capacity_mbps",
                    "limiting_direction", "utilization")
CDF_COLUMNS = ("sinr_db", "cumulative_fraction")


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if not np.isfinite(v):
            return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
        return f"{v:.10g}"
    return str(value)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        if len(r) != len(header):
            raise ValueError(f"row has {len(r)} fields, header has {len(header)}")
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(header, rows))
    return path


def write_dicts(path: str | Path, rows: Sequence[dict]) -> Path:
    """CSV from a list of dicts sharing the first row's keys (header-only when empty)."""
    header = list(rows[0]) if rows else []
    return write_csv(path, header, [[r[k] for k in header] for r in rows])


def output_path(out_dir: str | Path, scenario_id: str, metric: str, ext: str = "csv") -> Path:
    return Path(out_dir) / f"{scenario_id}__{metric}.{ext}"


def capacity_rows(results) -> list[list]:
    rows = []
    for r in results:
        d = r.to_dict() if hasattr(r, "to_dict") else dict(r)
        lim = d["limiting_direction"]
        rows.append([d["gnb_count"], d["antenna_kind"], d["latency_bound_ms"], d["max_offered_mbps"],
                     lim, d["utilization_at_capacity"][lim]])
    return rows


def emit_capacity_table(results, path: str | Path) -> Path:
    """One row per deployment: gnb_count, antenna_kind, latency_bound, capacity_mbps,
    limiting_direction, utilization. ``utilization`` is the mean converged cell
    utilisation of the limiting direction at capacity."""
    return write_csv(path, CAPACITY_COLUMNS, capacity_rows(results))


def sinr_cdf(per_ue_sinrs) -> np.ndarray:
    """Empirical CDF as rows (sinr_db, fraction); repeated values collapse onto one row."""
    x = np.asarray(per_ue_sinrs, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("empty SINR sample")
    if np.isnan(x).any():
        raise ValueError("SINR sample contains NaN")
    x = np.sort(x)
    vals, counts = np.unique(x, return_counts=True)
    return np.column_stack([vals, np.cumsum(counts) / x.size])


def emit_sinr_cdf(per_ue_sinrs, path: str | Path) -> Path:
    cdf = sinr_cdf(per_ue_sinrs)
    return write_csv(path, CDF_COLUMNS, cdf.tolist())


def dump_json(obj, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


@dataclass
class ExperimentManifest:
    """What is needed to rerun a CLI invocation and check its CSVs."""
    command: str
    config: dict
    config_hash: str
    seed: int
    code_version: str = __version__
    arguments: dict = field(default_factory=dict)
    results: list = field(default_factory=list)
    outputs: dict = field(default_factory=dict)       # file name -> sha256 of the CSV bytes
    wall_clock_s: float = 0.0
    started_at: str = ""

    def save(self, path: str | Path) -> Path:
        return dump_json(asdict(self), path)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentManifest":
        return cls(**json.loads(Path(path).read_text()))


def file_digest(path: str | Path) -> str:
    import hashlib
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class Stopwatch:
    def __init__(self):
        self.t0 = time.perf_counter()
        self.started_at = time.strftime("%Y-%m-%dT%H:%M:%S")

    @property
    def elapsed(self) -> float:
        return time.perf_counter() - self.t0


# ---------------------------------------------------------------- figures
def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def plot_cdf(curves: dict[str, np.ndarray], path: str | Path, xlabel: str = "SINR [dB]") -> Path:
    """Step plot of one or more (value, fraction) tables."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    for label, cdf in curves.items():
        cdf = np.asarray(cdf, dtype=float)
        ax.step(cdf[:, 0], cdf[:, 1], where="post", label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("CDF")
    ax.set_ylim(0, 1)
    ax.grid(alpha=0.3)
    if len(curves) > 1:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_capacity(rows: Sequence[Sequence], path: str | Path) -> Path:
    """Capacity against gNodeB count, one line per (antenna, bound); rows as in ``capacity_rows``."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    groups: dict[tuple, list] = {}
    for g, kind, bound, cap, _, _ in rows:
        groups.setdefault((kind, bound), []).append((g, cap))
    for (kind, bound), pts in sorted(groups.items()):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=f"{kind}, {bound:g} ms")
    ax.set_xlabel("gNodeBs")
    ax.set_ylabel("capacity [Mbps]")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_availability(rows: Sequence[Sequence], path: str | Path) -> Path:
    """Availability [%] against offered load; rows of (offered, dl, ul, both, ...)."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    a = np.asarray([r[:4] for r in rows], dtype=float)
    for col, label in ((1, "DL"), (2, "UL"), (3, "DL and UL")):
        ax.plot(a[:, 0], a[:, col], marker=".", label=label)
    ax.set_xlabel("offered load per direction [Mbps]")
    ax.set_ylabel("availability [%]")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_pattern_cut(cut: np.ndarray, path: str | Path) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    ax.plot(cut[:, 0], cut[:, 1])
    ax.set_xlabel("angle from boresight [deg]")
    ax.set_ylabel("gain [dBi]")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
