"""Stage 2 of SRBP: power control for a fixed pairing.

With the pairing fixed, every real sub-V-UE transmits the least power that
meets its SINR floor,

    P_k = gamma_T * (noise + S_m * G) / H  =  a_m + b_m * S_m,

because the C-UE rate only falls with V-UE power.  Substituting leaves a
separable concave maximization over the C-UE powers ``S`` with one budget per
C-UE and one linear budget per V-UE, solved here by a log-barrier Newton
method.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .allocation import Assignment, SubUserMap, pair_gains

LN2 = math.log(2.0)


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE_VUE = "infeasible_vue"


@dataclass
class PowerAllocation:
    """Per-sub-user transmit powers in mW.

    ``s[m]`` is indexed by sub-C-UE, ``p[k]`` by sub-V-UE.  ``violating``
    lists V-UEs whose SINR floor cannot be met even with silent partners;
    those are given their full budget split evenly and their partners ``S = 0``.
    """

    s: np.ndarray
    p: np.ndarray
    status: Status = Status.OPTIMAL
    violating: tuple = ()
    objective: float = float("nan")  # sum of sub-C-UE rates, bit/s/Hz
    kkt_residual: float = float("nan")
    iterations: int = 0
    trace: list = field(default_factory=list, repr=False)

    @property
    def feasible(self):
        return self.status is Status.OPTIMAL


@dataclass
class _Reduced:
    """Power-control problem after eliminating the V-UE powers."""

    a: np.ndarray  # P = a + b * S for the partner of sub-C-UE m
    b: np.ndarray
    h: np.ndarray  # desired C-UE gain per sub-C-UE
    c: np.ndarray  # noise + a * G' (interference floor seen at the eNB)
    d: np.ndarray  # b * G'
    vue_budget: np.ndarray  # pmax_vue - sum(a) per real V-UE
    owner: np.ndarray  # real V-UE of the partner, -1 for the dummy
    violating: tuple


def _reduce(assignment: Assignment, sub: SubUserMap, gains) -> _Reduced:
    h_cue, g_ve, h_v, g_cv = pair_gains(sub, gains)
    f = sub.size
    m = np.arange(f)
    k = assignment.pair
    real = sub.is_real[k]
    gam = sub.gamma_t[sub.vue_of[k]]
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(real, gam * gains.noise / h_v[k], 0.0)
        b = np.where(real, gam * g_cv[m, k] / h_v[k], 0.0)
    owner = np.where(real, sub.vue_of[k], -1)
    used = np.bincount(owner[real], weights=a[real], minlength=sub.num_vues)
    budget = sub.pmax_vue - used
    violating = tuple(int(v) for v in np.flatnonzero(budget < -1e-12 * sub.pmax_vue))
    return _Reduced(
        a=a, b=b, h=h_cue,
        c=gains.noise + a * g_ve[k],
        d=b * g_ve[k],
        vue_budget=budget,
        owner=owner,
        violating=violating,
    )


def feasibility_check(assignment: Assignment, sub: SubUserMap, gains):
    """Status of the silent-C-UE corner ``S = 0`` and the V-UEs it fails."""
    red = _reduce(assignment, sub, gains)
    status = Status.INFEASIBLE_VUE if red.violating else Status.OPTIMAL
    return status, red.violating


def _rate_terms(x, alpha, beta):
    """``log2(1 + alpha x / (1 + beta x))`` and its first two derivatives."""
    u = 1.0 + (alpha + beta) * x
    v = 1.0 + beta * x
    f = (np.log1p((alpha + beta) * x) - np.log1p(beta * x)) / LN2
    df = ((alpha + beta) / u - beta / v) / LN2
    d2f = (-((alpha + beta) / u) ** 2 + (beta / v) ** 2) / LN2
    return f, df, d2f


def _barrier_solve(alpha, beta, A, x0, trace=None, gap_tol=1e-9, mu=20.0, max_newton=10_000):
    """Maximize ``sum f_j(x_j)`` over ``{x > 0, A x <= 1}`` by a barrier method.

    Returns ``(x, kkt_residual, newton_steps)``.  The KKT residual is the
    larger of the stationarity error of the barrier multipliers and the
    complementarity gap ``1/t``, in bit/s/Hz per unit of normalized power.
    """
    n, r = len(x0), A.shape[0]
    x = x0.copy()
    t = 1.0
    steps = 0
    stage = 0

    def change(x1, s1, x2, s2, tt):
        # barrier(x2) - barrier(x1), term by term to avoid cancellation at large t
        f1 = _rate_terms(x1, alpha, beta)[0]
        f2 = _rate_terms(x2, alpha, beta)[0]
        return -tt * (f2 - f1).sum() - np.log(x2 / x1).sum() - np.log(s2 / s1).sum()

    while True:
        stage += 1
        for _ in range(100):
            s = 1.0 - A @ x
            f, df, d2f = _rate_terms(x, alpha, beta)
            grad = -t * df - 1.0 / x + A.T @ (1.0 / s)
            hess = (A.T * (1.0 / s**2)) @ A
            hess[np.diag_indices(n)] += -t * d2f + 1.0 / x**2
            # symmetric diagonal scaling keeps the solve well conditioned
            dsc = 1.0 / np.sqrt(np.diag(hess))
            dx = dsc * np.linalg.solve(hess * dsc[:, None] * dsc[None, :], -grad * dsc)
            dec = float(-grad @ dx)
            if trace is not None:
                trace.append({"stage": stage, "step": steps, "t": t,
                              "objective": float(f.sum()), "decrement": dec})
            if dec / 2.0 <= 1e-10 * (n + r):
                break
            step = 1.0
            neg = dx < 0
            if neg.any():
                step = min(step, 0.99 * float(np.min(-x[neg] / dx[neg])))
            adx = A @ dx
            pos = adx > 0
            if pos.any():
                step = min(step, 0.99 * float(np.min(s[pos] / adx[pos])))
            while step > 1e-12:
                xn = x + step * dx
                if change(x, s, xn, 1.0 - A @ xn, t) <= -0.25 * step * dec:
                    break
                step *= 0.5
            else:
                break
            x = xn
            steps += 1
        if (n + r) / t < gap_tol or steps >= max_newton:
            break
        t *= mu

    x = _push_to_boundary(x, alpha, beta, A)
    return x, kkt_residual(x, alpha, beta, A), steps


def _push_to_boundary(x, alpha, beta, A):
    """Raise every coordinate until some constraint through it is tight.

    The objective increases in each ``x_j``, so this never hurts.  It removes
    the residual slack the barrier leaves on constraints with tiny multipliers
    and exposes the active set at the optimum.
    """
    x = x.copy()
    _, df, _ = _rate_terms(x, alpha, beta)
    for j in np.argsort(-df, kind="stable"):
        col = A[:, j]
        on = col > 0
        if not on.any():
            continue
        room = float(np.min(np.maximum(1.0 - A[on] @ x, 0.0) / col[on]))
        x[j] += room
    return x


def kkt_residual(x, alpha, beta, A, active_tol=1e-4):
    """KKT residual of a candidate maximizer of ``sum f_j`` over ``{x >= 0, A x <= 1}``.

    Multipliers of the nearly active constraints are fitted by non-negative
    least squares.  Loosely active constraints are kept as candidates; a wrong
    candidate shows up in the complementarity products.  Returns the largest of the relative stationarity error,
    the complementarity products and the primal violation.
    """
    from scipy.optimize import nnls

    s = 1.0 - A @ x
    _, df, _ = _rate_terms(x, alpha, beta)
    act_r = s <= active_tol
    act_x = x <= active_tol
    basis = np.hstack([A[act_r].T, -np.eye(len(x))[:, act_x]])
    if basis.shape[1]:
        mult, _ = nnls(basis, df)
        resid = df - basis @ mult
        comp = np.concatenate([mult[: act_r.sum()] * s[act_r], mult[act_r.sum():] * x[act_x]])
    else:
        resid, comp = df, np.zeros(0)
    scale = max(1.0, float(np.abs(df).max()))
    viol = max(0.0, float(-s.min(initial=0.0)), float(-x.min(initial=0.0)))
    return max(float(np.abs(resid).max()) / scale, float(np.abs(comp).max(initial=0.0)), viol)


def solve_power(assignment: Assignment, sub: SubUserMap, gains, trace=None) -> PowerAllocation:
    """Optimal powers for a fixed pairing.

    V-UE powers meet their SINR floors with equality; C-UE powers maximize
    the sub-C-UE sum rate under the per-C-UE and induced per-V-UE budgets.
    """
    red = _reduce(assignment, sub, gains)
    f = sub.size
    pmax = sub.pmax_cue
    k = assignment.pair

    pinned = np.isin(red.owner, red.violating)
    tight = np.zeros(f, dtype=bool)
    real = red.owner >= 0
    tight[real] = red.vue_budget[red.owner[real]] <= 1e-12 * sub.pmax_vue
    pinned |= tight & (red.b > 0)
    free = np.flatnonzero(~pinned)

    s = np.zeros(f)
    kkt, steps = 0.0, 0
    if len(free):
        # normalized variables x = S / pmax_cue
        alpha = pmax * red.h[free] / red.c[free]
        beta = pmax * red.d[free] / red.c[free]
        rows = []
        cue = sub.cue_of[free]
        for c in np.unique(cue):
            rows.append((cue == c).astype(float))
        x0 = 0.5 / sub.cue_rbs[cue]
        own = red.owner[free]
        for v in np.unique(own[own >= 0]):
            coef = np.where(own == v, red.b[free] * pmax / red.vue_budget[v], 0.0)
            if coef.any():
                rows.append(coef)
                nz = coef > 0
                x0[nz] = np.minimum(x0[nz], 0.5 / (nz.sum() * coef[nz]))
        A = np.array(rows)
        x, kkt, steps = _barrier_solve(alpha, beta, A, x0, trace=trace)
        s[free] = x * pmax

    p = np.zeros(f)
    inv = assignment.partner_of_vue()
    for kk in range(f):
        v = sub.vue_of[kk]
        if v == sub.dummy:
            continue
        if v in red.violating:
            p[kk] = sub.pmax_vue / sub.vue_rbs[v]
        else:
            m = inv[kk]
            p[kk] = red.a[m] + red.b[m] * s[m]

    obj = float(np.log2(1.0 + s * red.h / (gains.noise + p[k] * pair_gains(sub, gains)[1][k])).sum())
    return PowerAllocation(
        s=s,
        p=p,
        status=Status.INFEASIBLE_VUE if red.violating else Status.OPTIMAL,
        violating=red.violating,
        objective=obj,
        kkt_residual=kkt,
        iterations=steps,
        trace=trace if trace is not None else [],
    )
