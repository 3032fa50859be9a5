"""Multi-drop orchestration shared by the command line and the demos.

Every drop is a pure function of ``(config, drop_index)``: all schemes see
the same slow-fading gains and the same small-scale fading draws, and the
output does not depend on the number of worker processes.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .allocation import expand_subusers
from .baselines import SizeError
from .config import ExperimentConfig
from .evaluation import Aggregator, check_allocation, simulate_ssf
from .qos import derive_sinr_threshold
from .scenario import generate_drop, linear_to_dbm
from .schemes import run_scheme


@dataclass
class DropOutput:
    results: list
    matching: list = field(default_factory=list)
    trace: list = field(default_factory=list)


def resolve_threshold(cfg: ExperimentConfig, workers=1):
    """Fill in ``gamma_T`` by Monte Carlo when the config does not give it."""
    if cfg.qos.gamma_t is None:
        cfg.with_threshold(derive_sinr_threshold(cfg.qos, cfg.mc, workers=workers))
    return cfg


def run_drop(cfg: ExperimentConfig, drop_index, dump_matching=False, trace_power=False):
    sub = expand_subusers(cfg.scenario, cfg.qos_list)
    _, gains = generate_drop(cfg.scenario, cfg.channel, drop_index)
    out = DropOutput(results=[])
    for name in cfg.schemes:
        trace = [] if trace_power and name == "srbp" else None
        a, pa = run_scheme(name, sub, gains, trace=trace, phi=cfg.phi)
        r = simulate_ssf(a, pa, gains, sub, cfg.qos_list, cfg.num_fading, cfg.seed,
                         drop_index=drop_index, scheme=name)
        r.violations = check_allocation(a, pa, gains, sub)
        out.results.append(r)
        if dump_matching:
            with np.errstate(divide="ignore"):
                s_dbm, p_dbm = linear_to_dbm(pa.s), linear_to_dbm(pa.p)
            for m in range(sub.size):
                k = a.pair[m]
                out.matching.append([name, drop_index, int(a.rb[m]), m, int(sub.cue_of[m]), int(k),
                                     int(sub.vue_of[k]) if sub.is_real[k] else "dummy",
                                     repr(float(s_dbm[m])), repr(float(p_dbm[k]))])
        if trace:
            out.trace.extend([drop_index, t["stage"], t["step"], repr(t["t"]), repr(t["objective"]),
                              repr(t["decrement"])] for t in trace)
    return out


def _run_drop_star(args):
    return run_drop(*args)


def run_experiment(cfg: ExperimentConfig, workers=1, dump_matching=False, trace_power=False):
    """Run every scheme on ``cfg.num_drops`` shared drops.

    Returns ``(reports, matching_rows, trace_rows)``; ``reports`` maps scheme
    name to :class:`~d2dv2v.evaluation.SchemeReport`.
    """
    if cfg.qos.gamma_t is None:
        raise ValueError("SINR threshold not resolved; call resolve_threshold first")
    if "optimal" in cfg.schemes and cfg.scenario.num_subbands > 8:
        raise SizeError(f"exhaustive search refused for F={cfg.scenario.num_subbands} > 8")
    expand_subusers(cfg.scenario, cfg.qos_list)  # fail fast on capacity errors
    args = [(cfg, d, dump_matching, trace_power) for d in range(cfg.num_drops)]
    agg = Aggregator(cfg.qos_list)
    matching, trace = [], []
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            outs = pool.map(_run_drop_star, args, chunksize=max(1, len(args) // (4 * workers)))
            for o in outs:
                _collect(o, agg, matching, trace)
    else:
        for a in args:
            _collect(_run_drop_star(a), agg, matching, trace)
    return agg.reports(), matching, trace


def _collect(o, agg, matching, trace):
    for r in o.results:
        agg.add(r)
    matching.extend(o.matching)
    trace.extend(o.trace)


MATCHING_HEADER = ["scheme", "drop", "rb", "sub_cue", "cue", "sub_vue", "vue", "S_dBm", "P_dBm"]
TRACE_HEADER = ["drop", "stage", "newton_step", "barrier_t", "objective", "decrement"]
