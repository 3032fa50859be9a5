"""Reference schemes: greedy pairing, per-pair power then matching, and exhaustive search."""

from __future__ import annotations

import itertools

import numpy as np

from .allocation import Assignment, SubUserMap, assign_rbs, hungarian_max_weight, pair_gains
from .power import PowerAllocation, Status, solve_power

INFEASIBLE_WEIGHT = -1e9
MAX_EXHAUSTIVE_SIZE = 8


class SizeError(ValueError):
    """Instance too large for exhaustive enumeration."""


def _objective(sub, gains, pair, s, p):
    h_cue, g_ve, _, _ = pair_gains(sub, gains)
    return float(np.log2(1.0 + s * h_cue / (gains.noise + p[pair] * g_ve[pair])).sum())


def _allocation(sub, gains, pair, s, p, violated):
    violated = tuple(sorted(set(int(v) for v in violated)))
    return PowerAllocation(
        s=s, p=p,
        status=Status.INFEASIBLE_VUE if violated else Status.OPTIMAL,
        violating=violated,
        objective=_objective(sub, gains, pair, s, p),
    )


def modified_zulhasnine(sub: SubUserMap, gains):
    """Greedy pairing at equal-split power, then C-UE back-off.

    Sub-C-UEs are visited in order of decreasing received power; each takes
    the free sub-V-UE it interferes with least (dummies suffer none).  A
    sub-C-UE whose partner misses its SINR floor lowers its power until the
    floor is met exactly, or to zero if that is not enough.
    """
    h_cue, _, h_v, g_cv = pair_gains(sub, gains)
    f = sub.size
    pc = sub.p_cue_eq[sub.cue_of]
    pv = sub.p_vue_eq[sub.vue_of]
    real = sub.is_real
    order = np.argsort(-(pc * h_cue), kind="stable")
    free = np.ones(f, dtype=bool)
    pair = np.empty(f, dtype=int)
    for m in order:
        interf = np.where(real, pc[m] * g_cv[m], 0.0)
        interf = np.where(free, interf, np.inf)
        k = int(np.argmin(interf))
        pair[m] = k
        free[k] = False

    s = pc.copy()
    p = pv.copy()
    s2 = gains.noise
    violated = []
    for m in range(f):
        k = pair[m]
        if not real[k]:
            continue
        gam = sub.gamma_t[sub.vue_of[k]]
        if pv[k] * h_v[k] / (s2 + s[m] * g_cv[m, k]) >= gam:
            continue
        headroom = pv[k] * h_v[k] / gam - s2
        if headroom < 0:
            s[m] = 0.0
            violated.append(sub.vue_of[k])
        else:
            s[m] = min(s[m], headroom / g_cv[m, k])
    a = assign_rbs(Assignment(pair=pair, total_weight=float("nan")), sub)
    return a, _allocation(sub, gains, pair, s, p, violated)


def feng_pair_powers(sub: SubUserMap, gains):
    """Per-pair powers and C-UE rates used by the modified Feng scheme.

    For every (sub-C-UE, sub-V-UE) pair the C-UE power is pushed as high as
    the equal-split caps allow while the V-UE sits on its SINR floor.
    Returns ``(S, P, rate, admissible)``, each ``(F, F)``.
    """
    h_cue, g_ve, h_v, g_cv = pair_gains(sub, gains)
    s2 = gains.noise
    pc = sub.p_cue_eq[sub.cue_of][:, None]
    pv = sub.p_vue_eq[sub.vue_of][None, :]
    real = sub.is_real[None, :]
    gam = sub.gamma_t[sub.vue_of][None, :]
    hv = h_v[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        admissible = ~real | (gam * s2 / np.where(real, hv, 1.0) <= pv)
        cap_v = np.where(g_cv > 0, (pv * hv / np.where(real, gam, 1.0) - s2) / g_cv, np.inf)
    S = np.where(real, np.minimum(pc, cap_v), pc)
    S = np.where(admissible, np.maximum(S, 0.0), 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        P = np.where(real, gam * (s2 + S * g_cv) / np.where(real, hv, 1.0), 0.0)
    P = np.where(admissible, P, np.broadcast_to(pv, P.shape))
    rate = np.log2(1.0 + S * h_cue[:, None] / (s2 + P * g_ve[None, :]))
    return S, P, rate, np.broadcast_to(admissible, rate.shape)


def modified_feng(sub: SubUserMap, gains):
    """Admission, per-pair power on the SINR boundary, then max-weight pairing.

    Pairs whose V-UE cannot reach its floor even against a silent C-UE get a
    large negative weight.  If such a pair ends up matched its V-UE is
    flagged, its C-UE is silenced and the V-UE uses its per-RB cap.
    """
    S, P, rate, ok = feng_pair_powers(sub, gains)
    w = np.where(ok, rate, INFEASIBLE_WEIGHT)
    a = assign_rbs(hungarian_max_weight(w), sub)
    m = np.arange(sub.size)
    s = S[m, a.pair].copy()
    p = np.zeros(sub.size)
    p[a.pair] = P[m, a.pair]
    violated = [sub.vue_of[k] for mm, k in zip(m, a.pair) if not ok[mm, k]]
    return a, _allocation(sub, gains, a.pair, s, p, violated)


def _pairing_key(sub, perm):
    # sub-users of one user are interchangeable
    return tuple(sorted(zip(sub.cue_of.tolist(), sub.vue_of[list(perm)].tolist())))


def exhaustive_optimal(sub: SubUserMap, gains, max_size=MAX_EXHAUSTIVE_SIZE):
    """Best pairing over all perfect matchings, each with optimal power control.

    Matchings that differ only by swapping sub-users of the same user are
    solved once.  Fully feasible matchings always win over infeasible ones.
    """
    f = sub.size
    if f > max_size:
        raise SizeError(f"exhaustive search refused for F={f} > {max_size} ({f}! matchings)")
    seen = set()
    best = None
    for perm in itertools.permutations(range(f)):
        key = _pairing_key(sub, perm)
        if key in seen:
            continue
        seen.add(key)
        a = Assignment(pair=np.array(perm, dtype=int))
        pa = solve_power(a, sub, gains)
        rank = (len(pa.violating), -pa.objective)
        if best is None or rank < best[0]:
            best = (rank, a, pa)
    _, a, pa = best
    a.total_weight = pa.objective
    return assign_rbs(a, sub), pa
