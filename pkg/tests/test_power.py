import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from d2dv2v.allocation import Assignment, srbp_matching
from d2dv2v.evaluation import check_allocation, vue_slow_sinr
from d2dv2v.power import Status, _rate_terms, feasibility_check, kkt_residual, solve_power

from .conftest import NOISE, PMAX, make_instance, random_instance


def objective(sub, g, pair, s):
    """C-UE sum rate with V-UE powers on their SINR floors, from raw gains.

    ``s`` may carry leading batch dimensions.
    """
    s = np.asarray(s, dtype=float)
    total = 0.0
    for m, k in enumerate(pair):
        c, v = sub.cue_of[m], sub.vue_of[k]
        sm = s[..., m]
        if v == sub.num_vues:
            p, gve = 0.0, 0.0
        else:
            p = sub.gamma_t[v] * (g.noise + sm * g.cue_vue[c, v]) / g.vue_pair[v]
            gve = g.vue_enb[v]
        total = total + np.log2(1 + sm * g.cue_enb[c] / (g.noise + p * gve))
    return total


def constraint_rows(sub, g, pair):
    """Linear constraints ``A S <= r`` on the C-UE powers, built from raw gains."""
    rows, rhs = [], []
    for c in range(sub.num_cues):
        rows.append((sub.cue_of == c).astype(float))
        rhs.append(sub.pmax_cue)
    for v in range(sub.num_vues):
        coef = np.zeros(sub.size)
        fixed = 0.0
        for m, k in enumerate(pair):
            if sub.vue_of[k] == v:
                c = sub.cue_of[m]
                coef[m] = sub.gamma_t[v] * g.cue_vue[c, v] / g.vue_pair[v]
                fixed += sub.gamma_t[v] * g.noise / g.vue_pair[v]
        rows.append(coef)
        rhs.append(sub.pmax_vue - fixed)
    return np.array(rows), np.array(rhs)


def grid_oracle(sub, g, pair, n=20_001):
    """Best objective over S_0 on a dense grid, S_1 at its largest feasible value.

    The objective increases in each S_m, so for fixed S_0 the best S_1 is the
    largest one the constraints allow; this equals a full 2-D grid search.
    """
    A, r = constraint_rows(sub, g, pair)
    s0_max = min((r[i] / A[i, 0] for i in range(len(r)) if A[i, 0] > 0), default=PMAX)
    s0 = np.linspace(0.0, s0_max, n)
    with np.errstate(divide="ignore", invalid="ignore"):
        lim = np.where(A[:, 1:2] > 0, (r[:, None] - A[:, 0:1] * s0[None, :]) / A[:, 1:2], np.inf)
    s1 = np.maximum(lim.min(axis=0), 0.0)
    return float(objective(sub, g, pair, np.stack([s0, s1], axis=1)).max())


def instance_2x2(rng, kind):
    if kind == 0:  # one C-UE and one V-UE, both on two RBs
        return random_instance(rng, [2], [2])
    if kind == 1:  # two C-UEs, one V-UE on both RBs
        return random_instance(rng, [1, 1], [2])
    if kind == 2:  # one C-UE on two RBs, two single-RB V-UEs
        return random_instance(rng, [2], [1, 1])
    return random_instance(rng, [1, 1], [1])  # one RB left to the dummy


def test_single_dummy_pair_full_power():
    sub, g, _ = make_instance([1], [], [1e-10], [], [], np.zeros((1, 0)))
    pa = solve_power(Assignment(pair=np.array([0])), sub, g)
    assert pa.s[0] == pytest.approx(PMAX)
    assert pa.p[0] == 0.0
    assert pa.objective == pytest.approx(np.log2(1 + PMAX * 1e-10 / NOISE))


def test_all_dummy_equal_split():
    sub, g, _ = make_instance([3, 1], [], [1e-10, 1e-11], [], [], np.zeros((2, 0)))
    pa = solve_power(Assignment(pair=np.arange(4)), sub, g)
    np.testing.assert_allclose(pa.s, [PMAX / 3] * 3 + [PMAX], rtol=1e-6)
    assert pa.kkt_residual < 1e-6


def test_decoupled_pair_keeps_full_power():
    # no C-UE -> V-UE interference: S at budget, P on the noise floor
    sub, g, _ = make_instance([1], [1], [1e-10], [1e-11], [1e-8], [[0.0]], l_tol=1)
    pa = solve_power(Assignment(pair=np.array([0])), sub, g)
    assert pa.s[0] == pytest.approx(PMAX, rel=1e-6)
    assert pa.p[0] == pytest.approx(sub.gamma_t[0] * NOISE / 1e-8, rel=1e-9)


@pytest.mark.parametrize("kind", [0, 1, 2, 3])
def test_grid_oracle_2x2(kind):
    rng = np.random.default_rng(100 + kind)
    for _ in range(5):
        sub, g, _ = instance_2x2(rng, kind)
        for pair in ([0, 1], [1, 0]):
            a = Assignment(pair=np.array(pair))
            pa = solve_power(a, sub, g)
            best = grid_oracle(sub, g, pair)
            assert pa.objective >= best * (1 - 1e-3)
            assert pa.objective <= best * (1 + 1e-3)
            assert pa.kkt_residual < 1e-6
            assert check_allocation(a, pa, g, sub) == []


def test_no_feasible_point_beats_solution(rng):
    """Independent optimality check: random feasible points never do better."""
    for _ in range(10):
        sub, g, _ = random_instance(rng, [2, 2, 2], [2, 1])
        a = srbp_matching(sub, g)
        pa = solve_power(a, sub, g)
        A, r = constraint_rows(sub, g, a.pair)
        best = pa.objective
        for _ in range(2000):
            d = rng.dirichlet(np.ones(sub.size)) * rng.uniform(0, 2) * PMAX
            scale = min(1.0, np.min(r / np.maximum(A @ d, 1e-300)))
            s = d * scale
            assert objective(sub, g, a.pair, s) <= best * (1 + 1e-9)
        # and small perturbations around the solution
        for _ in range(500):
            s = np.maximum(pa.s + rng.normal(0, 1e-3 * PMAX, sub.size), 0)
            if np.all(A @ s <= r):
                assert objective(sub, g, a.pair, s) <= best * (1 + 1e-9)


def test_objective_matches_raw_formula(rng):
    sub, g, _ = random_instance(rng, [5, 5], [2, 2, 2])
    a = srbp_matching(sub, g)
    pa = solve_power(a, sub, g)
    assert pa.objective == pytest.approx(objective(sub, g, a.pair, pa.s), rel=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1e4), st.floats(0, 1e4))
def test_rate_term_midpoint_concave(alpha, beta):
    rng = np.random.default_rng(int(alpha * 7 + beta) % 2**32)
    x = rng.uniform(0, 1, 1000)
    y = rng.uniform(0, 1, 1000)
    f = lambda z: _rate_terms(z, alpha, beta)[0]
    assert np.all(f((x + y) / 2) >= (f(x) + f(y)) / 2 - 1e-12)


def test_rate_term_concave_on_1e5_tuples(rng):
    n = 100_000
    alpha = 10 ** rng.uniform(-2, 6, n)
    beta = 10 ** rng.uniform(-4, 4, n)
    x, y = rng.uniform(0, 1, n), rng.uniform(0, 1, n)
    f = lambda z: _rate_terms(z, alpha, beta)[0]
    assert np.all(f((x + y) / 2) >= (f(x) + f(y)) / 2 - 1e-12)
    _, df, d2f = _rate_terms(x, alpha, beta)
    assert np.all(df > 0) and np.all(d2f <= 1e-12 * np.abs(df))


def test_rate_term_derivatives(rng):
    alpha, beta = 30.0, 4.0
    x = rng.uniform(0.05, 0.95, 50)
    f, df, d2f = _rate_terms(x, alpha, beta)
    h = 1e-6
    num = (_rate_terms(x + h, alpha, beta)[0] - _rate_terms(x - h, alpha, beta)[0]) / (2 * h)
    np.testing.assert_allclose(df, num, rtol=1e-6)
    num2 = (_rate_terms(x + h, alpha, beta)[1] - _rate_terms(x - h, alpha, beta)[1]) / (2 * h)
    np.testing.assert_allclose(d2f, num2, rtol=1e-5)


def test_vue_power_increases_with_interference():
    # P = a + b S: more C-UE power means more V-UE power on the same pair
    sub, g, _ = make_instance([1], [1], [1e-10], [1e-11], [1e-8], [[1e-11]], l_tol=1)
    a = Assignment(pair=np.array([0]))
    pa = solve_power(a, sub, g)
    s = np.linspace(0, pa.s[0], 5)
    p = sub.gamma_t[0] * (NOISE + s * 1e-11) / 1e-8
    assert np.all(np.diff(p) > 0)
    assert pa.p[0] == pytest.approx(p[-1], rel=1e-9)


def test_sinr_floor_met_with_equality(rng):
    sub, g, _ = random_instance(rng, [10] * 4, [2] * 6)
    a = srbp_matching(sub, g)
    pa = solve_power(a, sub, g)
    assert pa.feasible
    sinr = vue_slow_sinr(a, pa, g, sub)[sub.is_real]
    np.testing.assert_allclose(sinr, sub.gamma_t[sub.vue_of[sub.is_real]], rtol=1e-9)
    assert pa.kkt_residual < 1e-6


def test_infeasible_vue_flagged():
    # V-UE 0 needs more than its budget even with silent partners
    gam = 10.0
    hv_bad = gam * NOISE / (0.6 * PMAX)
    sub, g, _ = make_instance([1, 1, 1, 1], [2, 2], [1e-10] * 4, [1e-11] * 2, [hv_bad, 1e-8],
                              np.full((4, 2), 1e-12))
    a = srbp_matching(sub, g)
    status, bad = feasibility_check(a, sub, g)
    assert status is Status.INFEASIBLE_VUE and bad == (0,)
    pa = solve_power(a, sub, g)
    assert pa.status is Status.INFEASIBLE_VUE and not pa.feasible
    mine = np.flatnonzero(sub.vue_of == 0)
    np.testing.assert_allclose(pa.p[mine], PMAX / 2)
    assert np.all(pa.s[a.partner_of_vue()[mine]] == 0)
    assert check_allocation(a, pa, g, sub) == []


def test_constraint_suite_random(rng):
    for trial in range(30):
        m = rng.integers(1, 5)
        cue_rbs = list(rng.integers(1, 4, m))
        f = sum(cue_rbs)
        k = rng.integers(0, f // 2 + 1)
        vue_rbs = [1 + (trial % 2)] * k if sum([1 + (trial % 2)] * k) <= f else [1] * k
        sub, g, _ = random_instance(rng, cue_rbs, vue_rbs)
        pair = rng.permutation(f)
        a = Assignment(pair=pair)
        pa = solve_power(a, sub, g)
        assert check_allocation(a, pa, g, sub, require_sinr=True) == []
        assert pa.kkt_residual < 1e-6


def test_kkt_residual_detects_suboptimal_point():
    alpha, beta = np.array([10.0, 5.0]), np.array([1.0, 0.5])
    A = np.array([[1.0, 1.0]])
    assert kkt_residual(np.array([0.3, 0.3]), alpha, beta, A) > 1e-2
    assert kkt_residual(np.array([0.8, 0.8]), alpha, beta, A) > 0.5  # infeasible


def test_trace_records_newton_steps(rng):
    sub, g, _ = random_instance(rng, [3, 3], [2])
    trace = []
    pa = solve_power(srbp_matching(sub, g), sub, g, trace=trace)
    assert len(trace) >= pa.iterations > 0
    assert {"stage", "step", "t", "objective", "decrement"} <= set(trace[0])
