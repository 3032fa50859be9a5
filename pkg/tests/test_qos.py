import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from d2dv2v.qos import (
    BracketError,
    McConfig,
    SampleSizeWarning,
    VueQos,
    _screen,
    binomial_interval,
    critical_sinr,
    derive_sinr_threshold,
    outage_probability,
    rbs_per_time_unit,
)

SMALL = McConfig(num_samples=200_000, seed=7)
LOOSE = VueQos(p_o=1e-3)


@pytest.mark.parametrize("e_all,l_tol,e", [(20, 10, 2), (30, 10, 3), (25, 10, 3), (1, 10, 1), (10, 1, 10)])
def test_rbs_per_time_unit(e_all, l_tol, e):
    assert rbs_per_time_unit(e_all, l_tol) == e


def test_qos_validation():
    with pytest.raises(ValueError):
        VueQos(p_o=0.0)
    with pytest.raises(ValueError):
        VueQos(e_all=0)
    with pytest.raises(ValueError):
        VueQos(gamma_t=-1.0)
    assert VueQos().rbs_per_unit == 2
    assert VueQos(gamma_t=100.0).gamma_t_db == pytest.approx(20.0)


def test_outage_limits():
    q = VueQos(p_o=1e-2)
    mc = McConfig(num_samples=20_000, seed=1)
    assert outage_probability(1e-6, q, mc) == 1.0
    assert outage_probability(1e9, q, mc) == 0.0


def test_outage_monotone_in_sinr():
    mc = McConfig(num_samples=50_000, seed=3)
    g = 10 ** (np.linspace(20, 45, 15) / 10)
    p = [outage_probability(x, LOOSE, mc) for x in g]
    assert all(a >= b for a, b in zip(p, p[1:]))


def test_outage_falls_with_more_rbs():
    mc = McConfig(num_samples=50_000, seed=3)
    g = 10 ** 2.5
    p = [outage_probability(g, VueQos(p_o=1e-3, e_all=e), mc) for e in (10, 20, 40)]
    assert p[0] > p[1] > p[2]


def test_critical_sinr_solves_equation(rng):
    x = rng.exponential(size=(100, 20)) / (1 + rng.exponential(size=(100, 20)))
    g = critical_sinr(x, 152.38)
    lhs = np.log2(1 + g[:, None] * x).sum(axis=1)
    np.testing.assert_allclose(lhs, 152.38, rtol=1e-10)


def test_screen_matches_direct_count():
    """Outage read from the screened critical SINRs equals a direct count on the same samples."""
    mc = McConfig(num_samples=600_000, seed=11)  # spans three sample blocks
    scr = _screen(LOOSE, mc, workers=1)
    for db in (30.0, 32.0, 34.0, 36.0, 40.0):
        g = 10 ** (db / 10)
        direct = outage_probability(g, LOOSE, mc)
        via = scr.outage(g)
        if via is None:
            assert direct > LOOSE.p_o
        else:
            assert via == direct


def _naive_bisection(q, mc):
    def out(db):
        return outage_probability(10 ** (db / 10), q, mc)

    lo, hi = mc.bisection_lo_db, mc.bisection_hi_db
    while hi - lo > mc.tol_db:
        mid = 0.5 * (lo + hi)
        if out(mid) <= q.p_o:
            hi = mid
        else:
            lo = mid
    return hi


def test_threshold_matches_naive_bisection():
    g = derive_sinr_threshold(LOOSE, SMALL)
    assert 10 * math.log10(g) == pytest.approx(_naive_bisection(LOOSE, SMALL), abs=1e-12)
    assert outage_probability(g, LOOSE, SMALL) <= LOOSE.p_o
    assert outage_probability(10 ** ((10 * math.log10(g) - SMALL.tol_db) / 10), LOOSE, SMALL) > LOOSE.p_o


def test_threshold_is_deterministic_and_worker_independent():
    a = derive_sinr_threshold(LOOSE, SMALL, return_outage=True)
    b = derive_sinr_threshold(LOOSE, SMALL, workers=3, return_outage=True)
    assert a == b


def test_threshold_with_abundant_resources_is_low():
    q = VueQos(p_o=1e-2, e_all=2000)
    mc = McConfig(num_samples=2_000, seed=5, bisection_lo_db=-40.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SampleSizeWarning)
        g = derive_sinr_threshold(q, mc)
    assert 10 * math.log10(g) < 0.0


def test_threshold_falls_with_e_all():
    mc = McConfig(num_samples=100_000, seed=2)
    g = [derive_sinr_threshold(VueQos(p_o=1e-3, e_all=e), mc) for e in (20, 30, 40)]
    assert g[0] > g[1] > g[2]


def test_sample_size_warning():
    with pytest.warns(SampleSizeWarning):
        outage_probability(100.0, VueQos(p_o=1e-5), McConfig(num_samples=1000))


def test_bracket_error():
    mc = McConfig(num_samples=100_000, seed=1, bisection_lo_db=45.0, bisection_hi_db=60.0)
    with pytest.raises(BracketError) as exc:
        derive_sinr_threshold(LOOSE, mc)
    assert exc.value.lo_outage == 0.0
    mc = McConfig(num_samples=100_000, seed=1, bisection_lo_db=0.0, bisection_hi_db=10.0)
    with pytest.raises(BracketError):
        derive_sinr_threshold(LOOSE, mc)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 50), st.integers(60, 5000))
def test_binomial_interval_contains_estimate(k, n):
    lo, hi = binomial_interval(k, n)
    assert 0.0 <= lo <= k / n <= hi <= 1.0


def test_binomial_interval_zero_successes():
    _, hi = binomial_interval(0, 1000)
    assert hi == pytest.approx(1 - 0.025 ** (1 / 1000))
