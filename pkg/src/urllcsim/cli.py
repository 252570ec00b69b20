"""Command line entry point.

    urllcsim <subcommand> [config.yaml] [--gnbs N] [--antenna omni|dir|bf|das]
             [--seed S] [--out-dir DIR] ...

Files are named ``<scenario-id>__<metric>.csv``; each simulation subcommand
also writes a JSON summary and a manifest that ``replay`` can rerun.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import reporting as rep
from .antenna import AntennaKind, pattern_cut
from .config import ConfigError, RunConfig, from_dict, load_config
from .engine import DIRECTIONS, Simulator, lin2db
from .latency import ProcessingDelays, TddPattern, latency_table
from .linkmodel import LinkAbstraction, threshold_table

log = logging.getLogger("urllcsim")

ANTENNA_CHOICES = ("omni", "dir", "bf", "das")


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _common(p: argparse.ArgumentParser, sim: bool = True) -> None:
    p.add_argument("config", nargs="?", help="YAML config file (defaults when omitted)")
    p.add_argument("--out-dir", default="out", help="output directory (default: out)")
    if sim:
        p.add_argument("--gnbs", type=int, help="override scenario.gnbs")
        p.add_argument("--antenna", choices=ANTENNA_CHOICES, help="override scenario.antenna")
        p.add_argument("--seed", type=int, help="override simulation.seed")
        p.add_argument("--bound-ms", type=float, help="override latency.bound_ms")
        p.add_argument("--drops", type=int, help="override simulation.drops")
        p.add_argument("--ues", type=int, help="override simulation.ues_per_drop")
        p.add_argument("--workers", type=int, help="override simulation.workers")
        p.add_argument("--no-plots", action="store_true", help="skip PNG figures")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="urllcsim", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="one scenario at one offered load")
    _common(p)
    p.add_argument("--load", type=float, default=80.0, help="offered Mbps per direction (default 80)")
    p.add_argument("--pattern-cut", action="store_true", help="also dump the element pattern cut")

    p = sub.add_parser("sweep", help="offered-load sweep of one scenario, or capacity over densities")
    _common(p)
    p.add_argument("--loads", type=_floats, help="comma separated offered loads [Mbps]")
    p.add_argument("--densities", type=_ints, help="comma separated gNodeB counts")
    p.add_argument("--antennas", default=None, help="comma separated antenna kinds for --densities")
    p.add_argument("--bounds", type=_floats, default=None, help="comma separated latency bounds [ms]")

    p = sub.add_parser("capacity", help="bisection for the maximum URLLC service capacity")
    _common(p)

    p = sub.add_parser("latency-table", help="worst-case latency per number of attempts")
    _common(p, sim=False)
    p.add_argument("--max-attempts", type=int, default=3)

    p = sub.add_parser("reliability-table", help="total reliability against SNR per MCS and attempts")
    _common(p, sim=False)
    p.add_argument("--snr", type=_floats, default=None, help="lo,hi,step in dB (default -10,30,1)")
    p.add_argument("--attempts", type=_ints, default=[1, 2, 3])

    p = sub.add_parser("dump-mcs-thresholds", help="SNR thresholds per MCS at the reliability target")
    _common(p, sim=False)
    p.add_argument("--attempts", type=_ints, default=[1, 2, 3])

    p = sub.add_parser("replay", help="rerun a manifest and compare CSV digests")
    p.add_argument("manifest")
    p.add_argument("--out-dir", default=None, help="output directory (default: manifest's)")
    return ap


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config)
    over: dict[str, dict] = {}
    if getattr(args, "gnbs", None) is not None:
        over.setdefault("scenario", {})["gnbs"] = args.gnbs
    if getattr(args, "antenna", None) is not None:
        over.setdefault("scenario", {})["antenna"] = args.antenna
        if args.antenna == "das" and getattr(args, "gnbs", None) is None:
            over["scenario"]["gnbs"] = 1
    for flag, section, key in (("seed", "simulation", "seed"), ("drops", "simulation", "drops"),
                               ("ues", "simulation", "ues_per_drop"), ("workers", "simulation", "workers"),
                               ("bound_ms", "latency", "bound_ms")):
        v = getattr(args, flag, None)
        if v is not None:
            over.setdefault(section, {})[key] = v
    return cfg.replace(**over) if over else cfg


def _link(cfg: RunConfig) -> LinkAbstraction:
    lk = cfg.link
    return LinkAbstraction(payload_bits=8 * lk.payload_bytes, tti_symbols=lk.tti_symbols,
                           n_prb_total=cfg.scenario.n_prb, loss_base_db=lk.loss_base_db,
                           loss_slope_db=lk.loss_slope_db, pdcch_payload_bits=lk.pdcch_payload_bits,
                           pdcch_blocklength=lk.pdcch_blocklength, p3_nack_detect=lk.p3_nack_detect,
                           p4_dtx_detect=lk.p4_dtx_detect, fading_order=lk.fading_order_dl)


# ---------------------------------------------------------------- commands
def cmd_run(args, cfg: RunConfig, out: Path) -> dict:
    sim = Simulator(cfg)
    sid = sim.scenario.scenario_id
    files = {}
    sim.scenario.dump_json(rep.output_path(out, sid, "scenario", "json"))
    verdict, outs = sim.qos(args.load)
    rows, sinr = [], {d: [] for d in DIRECTIONS}
    k = 0
    for snap in sim.snapshots:
        per_dir = {}
        for d in DIRECTIONS:
            o = outs[d][snap.index]
            ls = snap.links[d]
            mean_sinr = lin2db(ls.signal / (ls.noise + ls.interference @ o.rho))
            sinr[d].append(mean_sinr)
            per_dir[d] = (mean_sinr, o.mcs_index, o.transmissions)
        for u in range(len(snap.drop)):
            x, y, _ = snap.drop.positions[u]
            rows.append([snap.index, u, x, y, int(snap.serving[u]), -float(snap.coupling_loss_db[u]),
                         per_dir["DL"][0][u], per_dir["UL"][0][u],
                         int(per_dir["DL"][1][u]), int(per_dir["UL"][1][u]),
                         per_dir["DL"][2][u], per_dir["UL"][2][u],
                         bool(verdict.dl_ok[k]), bool(verdict.ul_ok[k]), str(verdict.limiting_reason[k])])
            k += 1
    header = ("drop", "ue", "x_m", "y_m", "serving_cell", "coupling_gain_db", "dl_sinr_db", "ul_sinr_db",
              "dl_mcs", "ul_mcs", "dl_tx", "ul_tx", "dl_ok", "ul_ok", "reason")
    files["ue"] = rep.write_csv(rep.output_path(out, sid, "ue"), header, rows)
    cdfs = {}
    for d in DIRECTIONS:
        vals = np.concatenate(sinr[d])
        cdfs[d] = rep.sinr_cdf(vals)
        files[f"{d.lower()}_sinr_cdf"] = rep.emit_sinr_cdf(vals, rep.output_path(out, sid, f"{d.lower()}_sinr_cdf"))
    if args.pattern_cut:
        cut = pattern_cut(sim.array.element if sim.scenario.antenna_kind is AntennaKind.BEAMFORMED
                          else sim._pattern_for(sim.scenario.antenna_kind))
        files["pattern_cut"] = rep.write_csv(rep.output_path(out, sid, "pattern_cut"),
                                             ("angle_deg", "gain_dbi"), cut.tolist())
        if not args.no_plots:
            rep.plot_pattern_cut(cut, rep.output_path(out, sid, "pattern_cut", "png"))
    if not args.no_plots:
        rep.plot_cdf(cdfs, rep.output_path(out, sid, "sinr_cdf", "png"))
    util = {d: float(np.mean([o.rho.mean() for o in outs[d]])) for d in DIRECTIONS}
    summary = {"scenario_id": sid, "offered_mbps": args.load, "latency_bound_ms": cfg.latency.bound_ms,
               "attempts": sim.attempts, "availability_pct": 100.0 * float(verdict.served.mean()),
               "availability_pct_per_direction": {"DL": 100.0 * float(verdict.dl_ok.mean()),
                                                  "UL": 100.0 * float(verdict.ul_ok.mean())},
               "mean_utilization": util}
    rep.dump_json(summary, rep.output_path(out, sid, "summary", "json"))
    return {"scenario_id": sid, "files": files, "results": [summary]}


def _capacity_one(cfg: RunConfig):
    return Simulator(cfg).capacity_search()


def cmd_capacity(args, cfg: RunConfig, out: Path) -> dict:
    res = _capacity_one(cfg)
    sid = res.scenario_id
    files = {"capacity": rep.emit_capacity_table([res], rep.output_path(out, sid, "capacity"))}
    curve = [(x, a) for x, a in res.availability_curve]
    files["availability"] = rep.write_csv(rep.output_path(out, sid, "availability"),
                                          ("offered_mbps", "availability_pct"), curve)
    rep.dump_json(res.to_dict(), rep.output_path(out, sid, "summary", "json"))
    return {"scenario_id": sid, "files": files, "results": [res.to_dict()]}


def cmd_sweep(args, cfg: RunConfig, out: Path) -> dict:
    if args.densities:
        kinds = args.antennas.split(",") if args.antennas else [cfg.scenario.antenna]
        bounds = args.bounds or [cfg.latency.bound_ms]
        results = []
        for b in bounds:
            for kind in kinds:
                counts = [1] if AntennaKind.parse(kind) is AntennaKind.DAS else args.densities
                for g in counts:
                    c = cfg.replace(scenario={"gnbs": g, "antenna": kind}, latency={"bound_ms": b})
                    results.append(_capacity_one(c))
                    log.info("%s", rep.capacity_rows(results[-1:])[0])
        sid = "sweep"
        files = {"capacity": rep.emit_capacity_table(results, rep.output_path(out, sid, "capacity"))}
        if not args.no_plots and results:
            rep.plot_capacity(rep.capacity_rows(results), rep.output_path(out, sid, "capacity", "png"))
        dicts = [r.to_dict() for r in results]
        rep.dump_json(dicts, rep.output_path(out, sid, "summary", "json"))
        return {"scenario_id": sid, "files": files, "results": dicts}

    loads = args.loads or [20.0, 40.0, 80.0, 120.0, 160.0]
    sim = Simulator(cfg)
    sid = sim.scenario.scenario_id
    rows = []
    for x in sorted(loads):
        verdict, outs = sim.qos(x)
        util = [float(np.mean([o.rho.mean() for o in outs[d]])) for d in DIRECTIONS]
        rows.append([x, 100.0 * float(verdict.dl_ok.mean()), 100.0 * float(verdict.ul_ok.mean()),
                     100.0 * float(verdict.served.mean()), *util])
    header = ("offered_mbps", "availability_dl_pct", "availability_ul_pct", "availability_pct",
              "mean_utilization_dl", "mean_utilization_ul")
    files = {"availability": rep.write_csv(rep.output_path(out, sid, "availability"), header, rows)}
    if not args.no_plots:
        rep.plot_availability(rows, rep.output_path(out, sid, "availability", "png"))
    summary = [dict(zip(header, r)) for r in rows]
    rep.dump_json(summary, rep.output_path(out, sid, "summary", "json"))
    return {"scenario_id": sid, "files": files, "results": summary}


def cmd_latency_table(args, cfg: RunConfig, out: Path) -> dict:
    lat = cfg.latency
    pattern = TddPattern(tuple(lat.tdd_pattern), cfg.link.tti_symbols, cfg.scenario.scs_khz)
    delays = ProcessingDelays(lat.alignment_worst_ms, lat.rx_processing_ms, lat.harq_rtt_ms)
    rows = latency_table(pattern, delays, args.max_attempts)
    path = rep.write_dicts(rep.output_path(out, "latency", "table"), rows)
    sys.stdout.write(path.read_text())
    return {"scenario_id": "latency", "files": {"table": path}, "results": rows}


def cmd_reliability_table(args, cfg: RunConfig, out: Path) -> dict:
    lo, hi, step = args.snr or (-10.0, 30.0, 1.0)
    snr_db = np.arange(lo, hi + step / 2, step)
    link = _link(cfg)
    links = {"DL": link, "UL": dataclasses.replace(link, fading_order=cfg.link.fading_order_ul)}
    rows = []
    for d in DIRECTIONS:
        for n in args.attempts:
            for mcs in sorted(link.mcs_table):
                rel = links[d].total_reliability(10 ** (snr_db / 10), mcs, n, d)
                rows.extend([d, n, mcs.name, s, r, -math.log10(max(1.0 - r, 1e-300))]
                            for s, r in zip(snr_db, rel))
    header = ("direction", "attempts", "mcs", "snr_db", "reliability", "nines")
    path = rep.write_csv(rep.output_path(out, "link", "reliability"), header, rows)
    return {"scenario_id": "link", "files": {"reliability": path}, "results": []}


def cmd_thresholds(args, cfg: RunConfig, out: Path) -> dict:
    link = _link(cfg)
    rows = threshold_table(link, args.attempts, cfg.simulation.reliability_target)
    ul = threshold_table(dataclasses.replace(link, fading_order=cfg.link.fading_order_ul),
                         args.attempts, cfg.simulation.reliability_target)
    for r, u in zip(rows, ul):
        for n in args.attempts:
            r[f"ul_n{n}_snr_db"] = u[f"ul_n{n}_snr_db"]
    path = rep.write_dicts(rep.output_path(out, "link", "mcs_thresholds"), rows)
    sys.stdout.write(path.read_text())
    return {"scenario_id": "link", "files": {"mcs_thresholds": path}, "results": rows}


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "capacity": cmd_capacity,
            "latency-table": cmd_latency_table, "reliability-table": cmd_reliability_table,
            "dump-mcs-thresholds": cmd_thresholds}


def execute(command: str, args, cfg: RunConfig, out: Path) -> rep.ExperimentManifest:
    watch = rep.Stopwatch()
    out.mkdir(parents=True, exist_ok=True)
    res = COMMANDS[command](args, cfg, out)
    digests = {Path(p).name: rep.file_digest(p) for p in res["files"].values()}
    arguments = {k: v for k, v in vars(args).items() if k not in ("config", "out_dir", "command", "verbose")}
    man = rep.ExperimentManifest(command, cfg.to_dict(), cfg.digest(), cfg.simulation.seed, __version__,
                                 arguments, res["results"], digests, round(watch.elapsed, 3), watch.started_at)
    man.save(rep.output_path(out, res["scenario_id"], command.replace("-", "_") + "_manifest", "json"))
    return man


def replay(manifest_path: str | Path, out_dir: str | Path | None = None) -> tuple[rep.ExperimentManifest, bool]:
    """Rerun a manifest; returns the new manifest and whether every CSV digest matched."""
    old = rep.ExperimentManifest.load(manifest_path)
    out = Path(out_dir) if out_dir is not None else Path(manifest_path).parent
    args = argparse.Namespace(**old.arguments)
    new = execute(old.command, args, from_dict(old.config), out)
    return new, new.outputs == old.outputs


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        if args.command == "replay":
            man, same = replay(args.manifest, args.out_dir)
            print("identical" if same else "DIFFERENT", *sorted(man.outputs))
            return 0 if same else 1
        cfg = resolve_config(args)
        man = execute(args.command, args, cfg, Path(args.out_dir))
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for name in sorted(man.outputs):
        log.info("wrote %s", Path(args.out_dir) / name)
    return 0


if __name__ == "__main__":
    sys.exit(main())
