import itertools

import numpy as np
import pytest

from d2dv2v.allocation import Assignment
from d2dv2v.baselines import (
    SizeError,
    exhaustive_optimal,
    feng_pair_powers,
    modified_feng,
    modified_zulhasnine,
)
from d2dv2v.evaluation import check_allocation, vue_slow_sinr
from d2dv2v.power import solve_power
from d2dv2v.schemes import SCHEMES, run_scheme, srbp

from .conftest import NOISE, PMAX, make_instance, random_instance


def test_zulhasnine_dummy_only_full_power():
    sub, g, _ = make_instance([1], [], [1e-10], [], [], np.zeros((1, 0)))
    a, pa = modified_zulhasnine(sub, g)
    assert a.pair.tolist() == [0]
    assert pa.s[0] == PMAX and pa.p[0] == 0.0


def test_zulhasnine_no_reduction_when_sinr_met():
    sub, g, _ = make_instance([1], [1], [1e-10], [1e-11], [1e-6], [[1e-14]], l_tol=1)
    _, pa = modified_zulhasnine(sub, g)
    assert pa.s[0] == PMAX
    assert pa.p[0] == PMAX


def test_zulhasnine_reduction_hits_floor_exactly():
    sub, g, _ = make_instance([1], [1], [1e-10], [1e-11], [1e-9], [[1e-9]], l_tol=1)
    a, pa = modified_zulhasnine(sub, g)
    assert 0 < pa.s[0] < PMAX
    sinr = vue_slow_sinr(a, pa, g, sub)[0]
    assert sinr == pytest.approx(sub.gamma_t[0], rel=1e-9)
    assert pa.feasible


def test_zulhasnine_clamps_to_zero():
    # V-UE cannot meet its floor even with a silent C-UE
    gam = 10.0
    sub, g, _ = make_instance([1], [1], [1e-10], [1e-11], [0.5 * gam * NOISE / PMAX], [[1e-9]], l_tol=1)
    _, pa = modified_zulhasnine(sub, g)
    assert pa.s[0] == 0.0
    assert pa.violating == (0,)


def test_zulhasnine_greedy_order(rng):
    # strongest C-UE picks the least-interfered free sub-V-UE first; dummies count as zero
    sub, g, _ = make_instance([1, 1, 1], [1, 1], [1e-9, 1e-10, 1e-11], [1e-11] * 2, [1e-6] * 2,
                              [[5e-12, 1e-12], [1e-13, 2e-12], [1e-12, 1e-12]], l_tol=1)
    a, pa = modified_zulhasnine(sub, g)
    assert a.pair[0] == 2  # dummy
    assert a.pair[1] == 0
    assert a.pair[2] == 1
    assert np.all(pa.s <= sub.p_cue_eq[sub.cue_of])


def test_zulhasnine_never_exceeds_equal_split(rng):
    for _ in range(20):
        sub, g, _ = random_instance(rng, [3, 2, 1], [2, 2])
        a, pa = modified_zulhasnine(sub, g)
        assert np.all(pa.s <= sub.p_cue_eq[sub.cue_of] + 1e-12)
        assert check_allocation(a, pa, g, sub) == []


def test_feng_dummy_column_weight():
    h = 2e-11
    sub, g, _ = make_instance([1, 1], [1], [h, h], [1e-11], [1e-8], [[1e-12]] * 2, l_tol=1)
    _, _, rate, ok = feng_pair_powers(sub, g)
    np.testing.assert_allclose(rate[:, 1], np.log2(1 + PMAX * h / NOISE))
    assert ok[:, 1].all()


def test_feng_decoupled_pair():
    sub, g, _ = make_instance([1], [1], [1e-10], [1e-11], [1e-8], [[0.0]], l_tol=1)
    S, P, _, ok = feng_pair_powers(sub, g)
    assert ok[0, 0]
    assert S[0, 0] == PMAX
    assert P[0, 0] == pytest.approx(sub.gamma_t[0] * NOISE / 1e-8)


def test_feng_boundary_power():
    sub, g, _ = random_instance(np.random.default_rng(3), [2, 2], [2])
    S, P, _, ok = feng_pair_powers(sub, g)
    pc = sub.p_cue_eq[sub.cue_of][:, None]
    pv = sub.p_vue_eq[sub.vue_of][None, :]
    assert np.all(S <= pc * (1 + 1e-12)) and np.all(P <= pv * (1 + 1e-9))
    for m in range(4):
        for k in range(2):  # real sub-V-UEs sit on the SINR floor
            v = sub.vue_of[k]
            sinr = P[m, k] * g.vue_pair[v] / (NOISE + S[m, k] * g.cue_vue[sub.cue_of[m], v])
            assert sinr == pytest.approx(sub.gamma_t[v], rel=1e-9)


def test_feng_matching_equals_brute_force(rng):
    for _ in range(20):
        sub, g, _ = random_instance(rng, [1, 1, 2], [2])
        _, _, rate, ok = feng_pair_powers(sub, g)
        w = np.where(ok, rate, -1e9)
        a, pa = modified_feng(sub, g)
        best = max(w[np.arange(4), list(p)].sum() for p in itertools.permutations(range(4)))
        assert w[np.arange(4), a.pair].sum() == pytest.approx(best, rel=1e-12)
        assert check_allocation(a, pa, g, sub) == []


def test_feng_flags_inadmissible():
    gam = 10.0
    sub, g, _ = make_instance([1, 1], [2], [1e-10] * 2, [1e-11], [0.5 * gam * NOISE / (PMAX / 2)],
                              [[1e-12]] * 2, l_tol=10)
    a, pa = modified_feng(sub, g)
    assert pa.violating == (0,)
    assert np.all(pa.s == 0)
    np.testing.assert_allclose(pa.p, PMAX / 2)


def test_exhaustive_single_rb():
    sub, g, _ = make_instance([1], [1], [1e-10], [1e-11], [1e-8], [[1e-11]], l_tol=1)
    a, pa = exhaustive_optimal(sub, g)
    ref = solve_power(Assignment(pair=np.array([0])), sub, g)
    assert a.pair.tolist() == [0]
    assert pa.objective == pytest.approx(ref.objective)


def test_exhaustive_dominates_srbp(rng):
    for _ in range(20):
        sub, g, _ = random_instance(rng, [1, 1, 1], [1, 1])
        _, opt = exhaustive_optimal(sub, g)
        a, s = srbp(sub, g)
        assert opt.objective >= s.objective - 1e-9
        # equal when SRBP found the optimal pairing
        full = max(solve_power(Assignment(pair=np.array(p)), sub, g).objective
                   for p in itertools.permutations(range(3)))
        assert opt.objective == pytest.approx(full, rel=1e-9)


def test_exhaustive_dedup_matches_full_enumeration(rng):
    sub, g, _ = random_instance(rng, [2, 1, 1], [2])
    _, opt = exhaustive_optimal(sub, g)
    full = max(solve_power(Assignment(pair=np.array(p)), sub, g).objective
               for p in itertools.permutations(range(4)))
    assert opt.objective == pytest.approx(full, rel=1e-9)


def test_exhaustive_size_guard(rng):
    sub, g, _ = random_instance(rng, [9], [1])
    with pytest.raises(SizeError):
        exhaustive_optimal(sub, g)


def test_scheme_registry(rng):
    assert set(SCHEMES) == {"srbp", "feng", "zulhasnine", "optimal"}
    sub, g, _ = random_instance(rng, [2, 2], [2])
    for name in SCHEMES:
        a, pa = run_scheme(name, sub, g)
        assert check_allocation(a, pa, g, sub) == []
    with pytest.raises(KeyError):
        run_scheme("nope", sub, g)
