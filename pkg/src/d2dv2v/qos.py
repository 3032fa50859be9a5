"""V-UE latency/reliability requirements and their slow-SINR thresholds.

A V-UE must deliver ``N`` bits over ``E_all`` RBs within ``L_tol`` time units
with outage probability at most ``p_o``.  The eNB only knows slow fading, so
the requirement is enforced as a per-RB slow-SINR floor ``gamma_T`` chosen
such that

    Pr{ sum_i rho * log2(1 + gamma_T * |h_i|^2 / (1 + |g_i|^2)) < N } <= p_o

with ``|h_i|^2`` and ``|g_i|^2`` unit-mean exponential (Rayleigh fading).
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

BLOCK_SIZE = 1 << 18
LN2 = math.log(2.0)


class BracketError(ValueError):
    """The bisection bracket does not straddle the outage target."""

    def __init__(self, msg, lo_outage=None, hi_outage=None):
        super().__init__(msg)
        self.lo_outage = lo_outage
        self.hi_outage = hi_outage


class SampleSizeWarning(UserWarning):
    """Too few Monte-Carlo samples to resolve the outage target."""


def rbs_per_time_unit(e_all, l_tol):
    """RBs per scheduling time unit, ``ceil(e_all / l_tol)``."""
    e_all, l_tol = int(e_all), int(l_tol)
    if e_all < 1 or l_tol < 1:
        raise ValueError("E_all and L_tol must be positive integers")
    return -(-e_all // l_tol)


@dataclass(frozen=True)
class VueQos:
    """Requirement bundle of one V-UE.

    ``gamma_t`` is the linear slow-SINR threshold; ``None`` until derived.
    """

    n_bits: int = 12800
    p_o: float = 1e-5
    l_tol: int = 10
    rho: int = 84
    e_all: int = 20
    gamma_t: float | None = None

    def __post_init__(self):
        for name in ("n_bits", "l_tol", "rho", "e_all"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if not 0.0 < self.p_o < 1.0:
            raise ValueError(f"p_o must lie in (0, 1), got {self.p_o}")
        if self.gamma_t is not None and not self.gamma_t > 0:
            raise ValueError("gamma_t must be positive")

    @property
    def rbs_per_unit(self):
        return rbs_per_time_unit(self.e_all, self.l_tol)

    @property
    def gamma_t_db(self):
        return None if self.gamma_t is None else 10.0 * math.log10(self.gamma_t)

    def with_threshold(self, gamma_t):
        return replace(self, gamma_t=float(gamma_t))


@dataclass(frozen=True)
class McConfig:
    num_samples: int = 10_000_000
    seed: int = 2015
    bisection_lo_db: float = 0.0
    bisection_hi_db: float = 60.0
    tol_db: float = 0.05


def _block_sizes(n):
    full, rest = divmod(int(n), BLOCK_SIZE)
    return [BLOCK_SIZE] * full + ([rest] if rest else [])


def _fading_block(seed, block_index, size, e_all):
    """Effective SSF ratios ``|h|^2 / (1 + |g|^2)`` of one sample block."""
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(block_index,)))
    h = rng.standard_exponential((size, e_all))
    g = rng.standard_exponential((size, e_all))
    return h / (1.0 + g)


def _map_blocks(fn, sizes, workers):
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(fn, range(len(sizes)), sizes))
    return [fn(i, s) for i, s in enumerate(sizes)]


def _check_samples(qos, mc):
    if mc.num_samples < 1.0 / qos.p_o:
        warnings.warn(
            f"{mc.num_samples} samples cannot resolve an outage target of {qos.p_o:g}",
            SampleSizeWarning,
            stacklevel=3,
        )


def outage_probability(gamma_t, qos: VueQos, mc: McConfig = McConfig(), workers=1):
    """Monte-Carlo estimate of the restricted outage at slow SINR ``gamma_t``.

    Blocks are drawn from substreams keyed by ``(mc.seed, block_index)``, so
    calls with the same ``mc`` reuse one sample set (common random numbers).
    """
    if not gamma_t > 0:
        raise ValueError("gamma_t must be positive")
    _check_samples(qos, mc)
    target = qos.n_bits / qos.rho

    def count(i, size):
        x = _fading_block(mc.seed, i, size, qos.e_all)
        return int(np.count_nonzero(np.log2(1.0 + gamma_t * x).sum(axis=1) < target))

    return sum(_map_blocks(count, _block_sizes(mc.num_samples), workers)) / mc.num_samples


def critical_sinr(x, target, tol=1e-12, max_iter=200):
    """Per-sample slow SINR at which ``sum(log2(1 + g * x_i)) == target``.

    Newton's method in ``u = ln g``.  The left-hand side is convex and
    increasing in ``u``, so starting above the root (Jensen bound with the
    geometric mean of ``x``) the iterates decrease monotonically onto it.
    """
    x = np.maximum(np.asarray(x, dtype=float), 1e-300)
    e = x.shape[-1]
    gm = np.exp(np.log(x).mean(axis=-1))
    u = np.log(np.expm1(target * LN2 / e)) - np.log(gm)
    active = np.ones(u.shape, dtype=bool)
    for _ in range(max_iter):
        if not active.any():
            break
        ua = u[active]
        z = np.exp(ua)[:, None] * x[active]
        phi = np.log1p(z).sum(axis=1) / LN2 - target
        dphi = (z / (1.0 + z)).sum(axis=1) / LN2
        step = phi / dphi
        u[active] = ua - step
        still = np.abs(step) > tol
        idx = np.flatnonzero(active)
        active[idx[~still]] = False
    return np.exp(u)


@dataclass
class _Screen:
    """Tail summary of the CRN sample set used by threshold bisection.

    Holds, per sample block, the ``k = floor(p_o * n) + 1`` largest critical
    SINRs.  For ``gamma >= floor`` (the largest per-block k-th value) no block
    has more than ``k - 1`` samples above ``gamma``, so the outage count is
    exact; below ``floor`` some block alone already exceeds the target.
    """

    n: int
    k: int
    floor: float
    critical: np.ndarray  # sorted union of per-block top-k critical SINRs

    def outage(self, gamma):
        """Exact outage for ``gamma >= floor``; ``None`` below it (known > p_o)."""
        if gamma < self.floor:
            return None
        return (len(self.critical) - np.searchsorted(self.critical, gamma, side="right")) / self.n


def _screen(qos, mc, workers):
    n = mc.num_samples
    k = int(math.floor(qos.p_o * n)) + 1
    target = qos.n_bits / qos.rho
    c = math.expm1(target * LN2 / qos.e_all)

    def block(i, size):
        x = _fading_block(mc.seed, i, size, qos.e_all)
        if size > k:
            # critical SINR lies in [c / mean(x), c / geomean(x)]; only rows
            # whose upper bound reaches the k-th largest lower bound can be
            # in the block's top k
            lower = c / x.mean(axis=1)
            upper = c / np.exp(np.log(x).mean(axis=1))
            kth_lower = np.partition(lower, size - k)[size - k]
            x = x[upper >= kth_lower]
        crit = np.concatenate(
            [np.empty(0)] + [critical_sinr(x[j:j + 8192], target) for j in range(0, len(x), 8192)]
        )
        if len(crit) > k:
            crit = np.partition(crit, len(crit) - k)[len(crit) - k:]
            return crit, float(crit.min())
        return crit, 0.0

    parts = _map_blocks(block, _block_sizes(n), workers)
    crit = np.sort(np.concatenate([p[0] for p in parts]))
    floor = max(p[1] for p in parts)
    return _Screen(n=n, k=k, floor=floor, critical=crit)


def derive_sinr_threshold(qos: VueQos, mc: McConfig = McConfig(), workers=1, return_outage=False):
    """Smallest bracketed slow SINR (linear) meeting the outage target.

    Bisects in dB until the bracket is narrower than ``mc.tol_db``.  All
    iterates see one fixed sample set, so the estimated outage is monotone
    in the SINR and the bisection is well defined.

    Raises
    ------
    BracketError
        If ``outage(lo) <= p_o`` or ``outage(hi) > p_o``.
    """
    _check_samples(qos, mc)
    scr = _screen(qos, mc, workers)
    lo, hi = mc.bisection_lo_db, mc.bisection_hi_db

    def out(db):
        return scr.outage(10.0 ** (db / 10.0))

    p_lo, p_hi = out(lo), out(hi)
    lo_bad = p_lo is not None and p_lo <= qos.p_o
    hi_bad = p_hi is None or p_hi > qos.p_o
    if lo_bad or hi_bad:
        def fmt(p):
            return f"> {qos.p_o:g}" if p is None else f"{p:g}"
        raise BracketError(
            f"bracket [{lo}, {hi}] dB does not straddle p_o={qos.p_o:g}: "
            f"outage(lo) {fmt(p_lo)}, outage(hi) {fmt(p_hi)}",
            lo_outage=p_lo,
            hi_outage=p_hi,
        )
    while hi - lo > mc.tol_db:
        mid = 0.5 * (lo + hi)
        p = out(mid)
        if p is not None and p <= qos.p_o:
            hi = mid
        else:
            lo = mid
    gamma = 10.0 ** (hi / 10.0)
    if return_outage:
        return gamma, out(hi)
    return gamma


def binomial_interval(k, n, level=0.95):
    """Two-sided Clopper-Pearson interval for ``k`` successes out of ``n``."""
    from scipy.stats import beta

    a = (1.0 - level) / 2.0
    lo = 0.0 if k == 0 else float(beta.ppf(a, k, n - k + 1))
    hi = 1.0 if k == n else float(beta.ppf(1.0 - a, k + 1, n - k))
    return lo, hi
