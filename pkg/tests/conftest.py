import numpy as np
import pytest

from d2dv2v.allocation import expand_subusers
from d2dv2v.qos import VueQos
from d2dv2v.scenario import LinkGains, Scenario

NOISE = 10 ** (-117 / 10)
PMAX = 10 ** (24 / 10)


def make_instance(cue_rbs, vue_rbs, cue_enb, vue_enb, vue_pair, cue_vue, gamma_db=10.0, l_tol=10):
    """Sub-user map and gains for hand-built link gains."""
    f = sum(cue_rbs)
    sc = Scenario(num_subbands=f, cue_rbs=list(cue_rbs), vue_rbs=list(vue_rbs))
    qos = [VueQos(e_all=e * l_tol, l_tol=l_tol, gamma_t=10 ** (gamma_db / 10)) for e in vue_rbs]
    gains = LinkGains(
        cue_enb=np.asarray(cue_enb, float),
        vue_enb=np.asarray(vue_enb, float),
        vue_pair=np.asarray(vue_pair, float),
        cue_vue=np.asarray(cue_vue, float).reshape(len(cue_rbs), len(vue_rbs)),
        noise=sc.noise,
    )
    return expand_subusers(sc, qos), gains, qos


def random_instance(rng, cue_rbs, vue_rbs, gamma_db=10.0):
    """Random gains in a regime where every V-UE is feasible with silent partners."""
    m, k = len(cue_rbs), len(vue_rbs)
    gam = 10 ** (gamma_db / 10)
    return make_instance(
        cue_rbs, vue_rbs,
        cue_enb=10 ** rng.uniform(-13, -9, m),
        vue_enb=10 ** rng.uniform(-13, -9, k),
        # noise-limited V-UE power between 1% and 30% of its equal share
        vue_pair=gam * NOISE * np.asarray(vue_rbs) / (PMAX * rng.uniform(0.01, 0.3, k)),
        cue_vue=10 ** rng.uniform(-15, -10, (m, k)),
        gamma_db=gamma_db,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.LINES:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.LINES:
            terminalreporter.write_line(line)
