"""Metrics of an allocation: slow-fading sum rate and small-scale fading overlays.

Units: sum rates are bit/s/Hz averaged over the ``F`` sub-bands, V-UE
throughput is in bits delivered within the latency window.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .allocation import Assignment, SubUserMap, pair_gains
from .power import PowerAllocation
from .qos import binomial_interval

SINR_TOL = 1e-9


def sumrate_slow(assignment: Assignment, powers: PowerAllocation, gains, sub: SubUserMap, normalize=True):
    """Sub-C-UE sum rate under slow fading only.

    ``sum_m log2(1 + S_m H'_m / (noise + P_k G'_k))`` with ``k`` the partner of
    ``m``, divided by ``F`` when ``normalize`` is true.
    """
    h_cue, g_ve, _, _ = pair_gains(sub, gains)
    k = assignment.pair
    r = float(np.log2(1.0 + powers.s * h_cue / (gains.noise + powers.p[k] * g_ve[k])).sum())
    return r / sub.size if normalize else r


def vue_slow_sinr(assignment: Assignment, powers: PowerAllocation, gains, sub: SubUserMap):
    """Slow SINR of every sub-V-UE; NaN for dummy sub-V-UEs."""
    _, _, h_v, g_cv = pair_gains(sub, gains)
    inv = assignment.partner_of_vue()
    k = np.arange(sub.size)
    sinr = powers.p * h_v / (gains.noise + powers.s[inv] * g_cv[inv, k])
    return np.where(sub.is_real, sinr, np.nan)


def check_allocation(assignment: Assignment, powers: PowerAllocation, gains, sub: SubUserMap,
                     require_sinr=None, rtol=1e-9):
    """Mechanical constraint check of one allocation.

    Checks the bijection, the per-RB indicators, non-negativity, the per-user
    power budgets and, when ``require_sinr`` is true (default: when the
    allocation reports itself feasible), every real sub-V-UE's SINR floor.
    Returns a list of human-readable violations, empty when all hold.
    """
    bad = []
    f = sub.size
    pair = np.asarray(assignment.pair)
    if sorted(pair.tolist()) != list(range(f)):
        bad.append("pairing is not a permutation")
        return bad
    if assignment.rb is not None:
        q, l = assignment.indicators()
        if (q.sum(axis=0) != 1).any() or (q.sum(axis=1) != 1).any():
            bad.append("sub-V-UE RB indicators are not one-to-one")
        if (l.sum(axis=0) != 1).any() or (l.sum(axis=1) != 1).any():
            bad.append("sub-C-UE RB indicators are not one-to-one")
    s, p = np.asarray(powers.s), np.asarray(powers.p)
    if (s < 0).any() or (p < 0).any():
        bad.append("negative transmit power")
    cue_tot = np.bincount(sub.cue_of, weights=s, minlength=sub.num_cues)
    if (cue_tot > sub.pmax_cue * (1 + rtol)).any():
        bad.append(f"C-UE budget exceeded: max {cue_tot.max():.6g} > {sub.pmax_cue:.6g} mW")
    real = sub.is_real
    vue_tot = np.bincount(sub.vue_of[real], weights=p[real], minlength=sub.num_vues)
    if (vue_tot > sub.pmax_vue * (1 + rtol)).any():
        bad.append(f"V-UE budget exceeded: max {vue_tot.max():.6g} > {sub.pmax_vue:.6g} mW")
    if np.any(p[~real] != 0):
        bad.append("dummy sub-V-UE transmits")
    if require_sinr is None:
        require_sinr = powers.feasible
    if require_sinr and real.any():
        sinr = vue_slow_sinr(assignment, powers, gains, sub)[real]
        gam = sub.gamma_t[sub.vue_of[real]]
        short = sinr < gam * (1 - SINR_TOL)
        if short.any():
            bad.append(f"{int(short.sum())} sub-V-UEs below their SINR floor")
    return bad


@dataclass
class DropResult:
    """One scheme on one drop.

    ``vue_bits[k]`` holds the bits delivered by real V-UE ``k`` within its
    latency window, one entry per fading realization.
    """

    scheme: str
    drop_index: int
    sumrate_slow: float
    sumrate_ssf: np.ndarray
    vue_bits: np.ndarray  # (K', num_fading)
    vue_feasible: np.ndarray  # (K',) bool
    violations: list = field(default_factory=list)

    def __post_init__(self):
        if self.vue_bits.ndim != 2 or (self.vue_bits.size and self.vue_bits.shape[1] != len(self.sumrate_ssf)):
            raise ValueError("vue_bits must be (K', num_fading)")


def ssf_rng(seed, drop_index, stream):
    """Fading stream ``stream`` (0: C-UE links, 1: V-UE links) of one drop."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(drop_index), 1 + int(stream)]))


def vue_bits(assignment: Assignment, powers: PowerAllocation, gains, sub: SubUserMap,
             qos_list, num_fading, rng):
    """Bits delivered by every real V-UE within its latency window.

    V-UE ``k`` transmits on ``E_all`` RB slots spread over ``L_tol`` time
    units; slot ``j`` reuses the RB of its ``j mod E``-th sub-user, with the
    powers frozen over the window.  Returns ``(K', num_fading)``.
    """
    _, _, h_v, g_cv = pair_gains(sub, gains)
    s, p = powers.s, powers.p
    inv = assignment.partner_of_vue()
    bits = np.zeros((sub.num_vues, int(num_fading)))
    for v, q in enumerate(qos_list):
        mine = np.flatnonzero(sub.vue_of == v)
        slots = mine[np.arange(q.e_all) % len(mine)]
        sig = p[slots] * h_v[slots]
        intf = s[inv[slots]] * g_cv[inv[slots], slots]
        xh = rng.standard_exponential((int(num_fading), q.e_all))
        xg = rng.standard_exponential((int(num_fading), q.e_all))
        bits[v] = q.rho * np.log2(1.0 + sig * xh / (gains.noise + intf * xg)).sum(axis=1)
    return bits


def simulate_ssf(assignment: Assignment, powers: PowerAllocation, gains, sub: SubUserMap,
                 qos_list, num_fading, seed, drop_index=0, scheme=""):
    """Overlay i.i.d. Rayleigh fading on a fixed allocation.

    Fading power gains are unit-mean exponential, independent per link, per RB
    and per time unit.  The C-UE sum rate is sampled over one time unit and
    the V-UE bits over the latency window (see :func:`vue_bits`).

    Draws depend only on ``(seed, drop_index)``, so schemes evaluated on the
    same drop share their fading (common random numbers).
    """
    num_fading = int(num_fading)
    if num_fading < 1:
        raise ValueError("num_fading must be >= 1")
    if len(qos_list) != sub.num_vues:
        raise ValueError("one QoS entry per V-UE required")
    h_cue, g_ve, _, _ = pair_gains(sub, gains)
    f = sub.size
    k = assignment.pair
    rng = ssf_rng(seed, drop_index, 0)
    fh = rng.standard_exponential((num_fading, f))
    fg = rng.standard_exponential((num_fading, f))
    rate = np.log2(1.0 + powers.s * h_cue * fh / (gains.noise + powers.p[k] * g_ve[k] * fg)).sum(axis=1) / f
    bits = vue_bits(assignment, powers, gains, sub, qos_list, num_fading, ssf_rng(seed, drop_index, 1))

    sinr = vue_slow_sinr(assignment, powers, gains, sub)
    feas = np.ones(sub.num_vues, dtype=bool)
    for v in range(sub.num_vues):
        mine = sub.vue_of == v
        feas[v] = v not in powers.violating and bool(
            (sinr[mine] >= sub.gamma_t[v] * (1 - SINR_TOL)).all()
        )
    return DropResult(
        scheme=scheme,
        drop_index=int(drop_index),
        sumrate_slow=sumrate_slow(assignment, powers, gains, sub),
        sumrate_ssf=rate,
        vue_bits=bits,
        vue_feasible=feas,
    )


@dataclass
class SchemeReport:
    """Per-scheme aggregate over drops."""

    scheme: str
    num_drops: int
    mean_rate: float
    ci_halfwidth: float  # 95% normal interval on the mean slow sum rate
    mean_rate_ssf: float
    outage: float  # pooled Pr{bits < N} over drops, V-UEs and realizations
    outage_ci: tuple
    feasibility: float  # fraction of drops where every V-UE meets its floor
    violations: int  # constraint-check failures
    sumrate_slow: np.ndarray  # per drop, in drop order
    sumrate_ssf: np.ndarray  # pooled samples, sorted
    vue_bits: list  # per V-UE pooled samples, sorted


class Aggregator:
    """Streaming merge of DropResults into per-scheme reports."""

    def __init__(self, qos_list):
        self.qos_list = list(qos_list)
        self._acc = {}

    def add(self, r: DropResult):
        a = self._acc.setdefault(r.scheme, {
            "drops": [], "slow": [], "ssf": [], "bits": [[] for _ in self.qos_list],
            "short": 0, "trials": 0, "feasible": 0, "violations": 0,
        })
        a["drops"].append(r.drop_index)
        a["slow"].append(r.sumrate_slow)
        a["ssf"].append(np.asarray(r.sumrate_ssf, dtype=float))
        for v, q in enumerate(self.qos_list):
            a["bits"][v].append(r.vue_bits[v])
            a["short"] += int(np.count_nonzero(r.vue_bits[v] < q.n_bits))
            a["trials"] += r.vue_bits.shape[1]
        a["feasible"] += bool(np.all(r.vue_feasible))
        a["violations"] += len(r.violations)

    def reports(self):
        out = {}
        for name, a in self._acc.items():
            order = np.argsort(a["drops"], kind="stable")
            slow = np.asarray(a["slow"])[order]
            n = len(slow)
            half = 1.96 * slow.std(ddof=1) / math.sqrt(n) if n > 1 else float("nan")
            ssf = np.sort(np.concatenate(a["ssf"]))
            trials = a["trials"]
            outage = a["short"] / trials if trials else float("nan")
            ci = binomial_interval(a["short"], trials) if trials else (float("nan"), float("nan"))
            out[name] = SchemeReport(
                scheme=name,
                num_drops=n,
                mean_rate=float(slow.mean()),
                ci_halfwidth=float(half),
                mean_rate_ssf=float(ssf.mean()),
                outage=outage,
                outage_ci=ci,
                feasibility=a["feasible"] / n,
                violations=a["violations"],
                sumrate_slow=slow,
                sumrate_ssf=ssf,
                vue_bits=[np.sort(np.concatenate(b)) if b else np.zeros(0) for b in a["bits"]],
            )
        return out


def aggregate(results, qos_list):
    """Merge DropResults into ``{scheme: SchemeReport}``."""
    results = list(results)
    if not results:
        raise ValueError("no results to aggregate")
    agg = Aggregator(qos_list)
    for r in results:
        agg.add(r)
    return agg.reports()


def thin_cdf(sorted_samples, max_points):
    """Evenly spaced empirical quantiles of a sorted sample, at most ``max_points``."""
    x = np.asarray(sorted_samples)
    if max_points is None or len(x) <= max_points:
        return x
    idx = np.floor((np.arange(max_points) + 0.5) * len(x) / max_points).astype(int)
    return x[idx]


def _fmt(x):
    return repr(float(x))


def write_csvs(reports, out_dir, max_points=1000):
    """Write ``summary.csv``, ``sumrate_cdf.csv``, ``sumrate_ssf_cdf.csv`` and ``vue_bits_cdf.csv``.

    CDF files list samples in ascending order; long series are thinned to
    ``max_points`` evenly spaced quantiles.  Returns the written paths.
    """
    os.makedirs(out_dir, exist_ok=True)
    names = list(reports)
    paths = {}

    def write(fname, header, rows):
        path = os.path.join(out_dir, fname)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        paths[fname] = path

    write("summary.csv",
          ["scheme", "num_drops", "mean_rate_bps_hz", "ci95_halfwidth", "mean_rate_ssf_bps_hz",
           "vue_outage", "outage_ci_lo", "outage_ci_hi", "feasibility", "constraint_violations"],
          [[r.scheme, r.num_drops, _fmt(r.mean_rate), _fmt(r.ci_halfwidth), _fmt(r.mean_rate_ssf),
            _fmt(r.outage), _fmt(r.outage_ci[0]), _fmt(r.outage_ci[1]), _fmt(r.feasibility), r.violations]
           for r in (reports[n] for n in names)])
    write("sumrate_cdf.csv", ["scheme", "sample"],
          [[n, _fmt(x)] for n in names for x in np.sort(reports[n].sumrate_slow)])
    write("sumrate_ssf_cdf.csv", ["scheme", "sample"],
          [[n, _fmt(x)] for n in names for x in thin_cdf(reports[n].sumrate_ssf, max_points)])
    write("vue_bits_cdf.csv", ["scheme", "vue", "sample"],
          [[n, v, _fmt(x)] for n in names for v, b in enumerate(reports[n].vue_bits)
           for x in thin_cdf(b, max_points)])
    return paths
