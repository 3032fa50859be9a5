"""Command-line front end.

    d2dv2v derive-threshold --config exp.json
    d2dv2v run --config exp.json --drops 200 --workers 4 --out results/
    d2dv2v compare --config exp.json --scheme srbp feng zulhasnine

Exit codes: 0 success, 2 configuration error, 3 threshold bracket error,
4 refused problem size.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import math
import os
import sys

import numpy as np

from .allocation import CapacityError
from .baselines import SizeError
from .config import ConfigError, load_config
from .evaluation import write_csvs
from .experiment import MATCHING_HEADER, TRACE_HEADER, resolve_threshold, run_experiment
from .qos import BracketError, binomial_interval, derive_sinr_threshold
from .schemes import SCHEMES

EXIT_OK, EXIT_CONFIG, EXIT_BRACKET, EXIT_SIZE = 0, 2, 3, 4


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, metavar="PATH", help="JSON experiment file")
    common.add_argument("--seed", type=int, metavar="U64", help="override the drop seed")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--workers", type=int, default=1, metavar="N", help="worker processes")

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--scheme", nargs="+", choices=sorted(SCHEMES), help="schemes to run")
    sim.add_argument("--drops", type=int, metavar="N", help="override the number of drops")
    sim.add_argument("--dump-matching", action="store_true", help="write matching.csv")
    sim.add_argument("--trace-power", action="store_true", help="write power_trace.csv for SRBP")

    p = argparse.ArgumentParser(prog="d2dv2v", description="D2D V2V underlay resource management")
    sp = p.add_subparsers(dest="cmd", required=True)
    sp.add_parser("derive-threshold", parents=[common], help="SINR thresholds by Monte Carlo")
    sp.add_parser("run", parents=[common, sim], help="simulate drops and write CSVs")
    sp.add_parser("compare", parents=[common, sim], help="paired scheme comparison table")
    return p


def _load(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed: must be an unsigned 64-bit integer")
        cfg.seed = args.seed
        cfg.scenario.seed = args.seed
    if getattr(args, "drops", None) is not None:
        if args.drops < 1:
            raise ConfigError("--drops: must be >= 1")
        cfg.num_drops = args.drops
    if getattr(args, "scheme", None):
        cfg.schemes = list(args.scheme)
    if args.out is not None:
        cfg.output_dir = args.out
    if args.workers < 1:
        raise ConfigError("--workers: must be >= 1")
    return cfg


def _write(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def cmd_derive_threshold(cfg, workers=1, out=None):
    """Print one CSV row per ``E_all`` value: threshold, outage and its 95% CI."""
    out = out or sys.stdout
    sweep = cfg.threshold_sweep or [cfg.qos.e_all]
    n = cfg.mc.num_samples
    rows = []
    for e_all in sweep:
        q = dataclasses.replace(cfg.qos, e_all=e_all, gamma_t=None)
        gamma, p = derive_sinr_threshold(q, cfg.mc, workers=workers, return_outage=True)
        lo, hi = binomial_interval(round(p * n), n)
        rows.append([e_all, q.rbs_per_unit, f"{10 * math.log10(gamma):.3f}", f"{p:.3e}", f"{lo:.3e}", f"{hi:.3e}"])
    header = ["E_all", "E", "gamma_T_dB", "outage", "ci95_lo", "ci95_hi"]
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return header, rows


def cmd_run(cfg, workers=1, dump_matching=False, trace_power=False, out=None):
    out = out or sys.stdout
    resolve_threshold(cfg, workers)
    reports, matching, trace = run_experiment(cfg, workers, dump_matching, trace_power)
    paths = write_csvs(reports, cfg.output_dir, cfg.cdf_points)
    if dump_matching:
        _write(os.path.join(cfg.output_dir, "matching.csv"), MATCHING_HEADER, matching)
    if trace_power:
        _write(os.path.join(cfg.output_dir, "power_trace.csv"), TRACE_HEADER, trace)
    print(f"gamma_T = {cfg.qos.gamma_t_db:.3f} dB, {cfg.num_drops} drops", file=out)
    for r in reports.values():
        print(f"{r.scheme:>11s}  rate {r.mean_rate:.4f} +- {r.ci_halfwidth:.4f} bit/s/Hz  "
              f"outage {r.outage:.2e}  feasible {r.feasibility:.3f}  violations {r.violations}", file=out)
    print(f"wrote {', '.join(sorted(paths))} to {cfg.output_dir}", file=out)
    return reports


def cmd_compare(cfg, workers=1, out=None):
    """Paired comparison: mean rate per scheme and its difference to the first scheme."""
    out = out or sys.stdout
    resolve_threshold(cfg, workers)
    reports, _, _ = run_experiment(cfg, workers)
    names = list(reports)
    ref = reports[names[0]].sumrate_slow
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["scheme", "mean_rate", "ci95_halfwidth", f"diff_vs_{names[0]}", "diff_ci95_halfwidth", "feasibility"])
    rows = []
    for n in names:
        r = reports[n]
        d = ref - r.sumrate_slow
        half = 1.96 * d.std(ddof=1) / math.sqrt(len(d)) if len(d) > 1 else float("nan")
        row = [n, f"{r.mean_rate:.5f}", f"{r.ci_halfwidth:.5f}", f"{np.mean(d):.5f}", f"{half:.5f}",
               f"{r.feasibility:.3f}"]
        w.writerow(row)
        rows.append(row)
    return rows


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = _load(args)
        if args.cmd == "derive-threshold":
            cmd_derive_threshold(cfg, args.workers)
        elif args.cmd == "run":
            cmd_run(cfg, args.workers, args.dump_matching, args.trace_power)
        else:
            cmd_compare(cfg, args.workers)
    except (ConfigError, CapacityError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BracketError as exc:
        print(f"threshold error: {exc}", file=sys.stderr)
        return EXIT_BRACKET
    except SizeError as exc:
        print(f"size error: {exc}", file=sys.stderr)
        return EXIT_SIZE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
