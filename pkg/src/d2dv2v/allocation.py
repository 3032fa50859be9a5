"""Stage 1 of SRBP: sub-user expansion and RB pairing by maximum-weight matching.

Indices are 0-based.  Real V-UEs are ``0 .. K'-1``; the dummy V-UE that
absorbs unshared sub-bands is ``K'``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class CapacityError(ValueError):
    """More V-UE RBs are demanded than sub-bands exist."""


@dataclass
class SubUserMap:
    """Split of every user into single-RB sub-users.

    ``vue_of[k]`` is the V-UE owning sub-V-UE ``k`` (``num_vues`` for the
    dummy) and ``cue_of[m]`` the C-UE owning sub-C-UE ``m``.  ``gamma_t`` and
    ``p_vue_eq`` carry one entry per V-UE plus a trailing zero for the dummy.
    """

    cue_of: np.ndarray
    vue_of: np.ndarray
    num_cues: int
    num_vues: int
    cue_rbs: np.ndarray
    vue_rbs: np.ndarray  # includes the dummy
    gamma_t: np.ndarray
    pmax_cue: float
    pmax_vue: float

    @property
    def size(self):
        return len(self.cue_of)

    @property
    def dummy(self):
        return self.num_vues

    @property
    def is_real(self):
        """Mask over sub-V-UEs that belong to a real V-UE."""
        return self.vue_of < self.num_vues

    @property
    def p_cue_eq(self):
        """Equal-split per-RB power of every C-UE."""
        return self.pmax_cue / self.cue_rbs

    @property
    def p_vue_eq(self):
        """Equal-split per-RB power of every V-UE; zero for the dummy."""
        p = np.zeros(self.num_vues + 1)
        p[: self.num_vues] = self.pmax_vue / self.vue_rbs[: self.num_vues]
        return p


def expand_subusers(scenario, qos_list):
    """Build the sub-user maps of a scenario and its V-UE requirements."""
    if len(qos_list) != scenario.num_vues:
        raise ValueError(f"got {len(qos_list)} QoS entries for {scenario.num_vues} V-UEs")
    for k, (e, q) in enumerate(zip(scenario.vue_rbs, qos_list)):
        if q.gamma_t is None:
            raise ValueError(f"V-UE {k} has no SINR threshold")
        if q.rbs_per_unit != e:
            raise ValueError(f"V-UE {k}: scenario allots {e} RBs but QoS needs {q.rbs_per_unit}")
    f = scenario.num_subbands
    if sum(scenario.vue_rbs) > f:
        raise CapacityError(f"V-UEs need {sum(scenario.vue_rbs)} RBs but only {f} sub-bands exist")
    vue_rbs = np.array(list(scenario.vue_rbs) + [f - sum(scenario.vue_rbs)], dtype=int)
    cue_rbs = np.array(scenario.cue_rbs, dtype=int)
    return SubUserMap(
        cue_of=np.repeat(np.arange(len(cue_rbs)), cue_rbs),
        vue_of=np.repeat(np.arange(len(vue_rbs)), vue_rbs),
        num_cues=len(cue_rbs),
        num_vues=scenario.num_vues,
        cue_rbs=cue_rbs,
        vue_rbs=vue_rbs,
        gamma_t=np.array([q.gamma_t for q in qos_list] + [0.0]),
        pmax_cue=scenario.pmax_cue,
        pmax_vue=scenario.pmax_vue,
    )


def pair_gains(sub: SubUserMap, gains):
    """Per-sub-user gain arrays.

    Returns ``(h_cue, g_vue_enb, h_vue, g_cue_vue)`` where the first is indexed
    by sub-C-UE, the next two by sub-V-UE and the last is ``(F, F)``.  Dummy
    entries are zero; callers must use ``sub.is_real`` rather than the
    zero ``h_vue`` of the dummy.
    """
    real = sub.is_real
    kv = np.where(real, sub.vue_of, 0)
    h_cue = gains.cue_enb[sub.cue_of]
    g_ve = np.where(real, gains.vue_enb[kv] if gains.num_vues else 0.0, 0.0)
    h_v = np.where(real, gains.vue_pair[kv] if gains.num_vues else 0.0, 0.0)
    if gains.num_vues:
        g_cv = gains.cue_vue[sub.cue_of][:, kv] * real[None, :]
    else:
        g_cv = np.zeros((sub.size, sub.size))
    return h_cue, g_ve, h_v, g_cv


@dataclass
class WeightMatrix:
    w: np.ndarray
    phi: float
    rate: np.ndarray
    violation: np.ndarray  # min(SINR - gamma_T, 0) in linear units


def build_weights(sub: SubUserMap, gains, phi=None):
    """Penalized pairing weights under equal power allocation.

    ``w[m, k] = rate(m, k) + phi * min(sinr_vue(m, k) - gamma_T, 0)``, where
    ``rate`` is the sub-C-UE rate with sub-V-UE ``k`` as interferer.  The
    dummy columns are interference-free with zero penalty.  ``phi`` defaults
    to ``1e3 * F * max(rate)``.
    """
    h_cue, g_ve, h_v, g_cv = pair_gains(sub, gains)
    pc = sub.p_cue_eq[sub.cue_of]
    pv = sub.p_vue_eq[sub.vue_of]
    s2 = gains.noise
    rate = np.log2(1.0 + (pc * h_cue)[:, None] / (s2 + pv * g_ve)[None, :])
    real = sub.is_real
    sinr = np.where(real[None, :], (pv * h_v)[None, :] / (s2 + pc[:, None] * g_cv), 0.0)
    violation = np.where(real[None, :], np.minimum(sinr - sub.gamma_t[sub.vue_of][None, :], 0.0), 0.0)
    if phi is None:
        phi = 1e3 * sub.size * float(rate.max())
    return WeightMatrix(w=rate + phi * violation, phi=float(phi), rate=rate, violation=violation)


@dataclass
class Assignment:
    """Perfect matching between sub-C-UEs and sub-V-UEs.

    ``pair[m]`` is the sub-V-UE sharing an RB with sub-C-UE ``m`` and
    ``rb[m]`` the index of that RB (``None`` until assigned).
    """

    pair: np.ndarray
    total_weight: float = float("nan")
    rb: np.ndarray | None = None

    @property
    def size(self):
        return len(self.pair)

    def partner_of_vue(self):
        """Inverse permutation: sub-C-UE paired with each sub-V-UE."""
        inv = np.empty_like(self.pair)
        inv[self.pair] = np.arange(len(self.pair))
        return inv

    def indicators(self):
        """RB indicators ``(q, l)``: ``q[f, k]`` for sub-V-UEs, ``l[f, m]`` for sub-C-UEs."""
        if self.rb is None:
            raise ValueError("RBs not assigned")
        f = self.size
        q = np.zeros((f, f), dtype=int)
        l = np.zeros((f, f), dtype=int)
        l[self.rb, np.arange(f)] = 1
        q[self.rb, self.pair] = 1
        return q, l


def _hungarian_min(cost):
    """Shortest-augmenting-path Hungarian method, O(n^3), minimizing total cost.

    Returns ``col`` with ``col[i]`` the column assigned to row ``i``.
    Ties are broken by the first minimum in column order.
    """
    n = cost.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=int)  # p[j]: row (1-based) matched to column j
    way = np.zeros(n + 1, dtype=int)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used[1:]
            cur = cost[i0 - 1] - u[i0] - v[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            masked = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(masked)) + 1
            delta = masked[j1 - 1]
            u[p[used]] += delta
            v[used] -= delta
            minv[1:][free] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    col = np.empty(n, dtype=int)
    col[p[1:] - 1] = np.arange(n)
    return col


def hungarian_max_weight(w) -> Assignment:
    """Maximum-weight perfect matching of a square weight matrix."""
    if isinstance(w, WeightMatrix):
        w = w.w
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError(f"weight matrix must be square, got shape {w.shape}")
    if not np.isfinite(w).all():
        raise ValueError("weight matrix has non-finite entries")
    if w.size == 0:
        return Assignment(pair=np.zeros(0, dtype=int), total_weight=0.0)
    col = _hungarian_min(w.max() - w)
    return Assignment(pair=col, total_weight=float(w[np.arange(len(col)), col].sum()))


def assign_rbs(assignment: Assignment, sub: SubUserMap | None = None) -> Assignment:
    """Give the pair of sub-C-UE ``m`` RB ``m``.

    Slow-fading CSI is flat over the band, so any orthogonal placement is
    equivalent; this one is deterministic.
    """
    return Assignment(
        pair=assignment.pair.copy(),
        total_weight=assignment.total_weight,
        rb=np.arange(assignment.size),
    )


def srbp_matching(sub: SubUserMap, gains, phi=None) -> Assignment:
    """Stage 1 of SRBP: weights, Hungarian matching and RB placement."""
    return assign_rbs(hungarian_max_weight(build_weights(sub, gains, phi)), sub)
