"""Scheme registry shared by the evaluation harness and the command line."""

from __future__ import annotations

from .allocation import SubUserMap, srbp_matching
from .baselines import exhaustive_optimal, modified_feng, modified_zulhasnine
from .power import solve_power


def srbp(sub: SubUserMap, gains, phi=None, trace=None):
    """Two-stage SRBP: penalized Hungarian pairing, then optimal power control."""
    a = srbp_matching(sub, gains, phi)
    return a, solve_power(a, sub, gains, trace=trace)


SCHEMES = {
    "srbp": srbp,
    "feng": modified_feng,
    "zulhasnine": modified_zulhasnine,
    "optimal": exhaustive_optimal,
}


def run_scheme(name, sub, gains, trace=None, phi=None):
    """Run one scheme; ``trace`` and ``phi`` only affect SRBP."""
    if name not in SCHEMES:
        raise KeyError(f"unknown scheme {name!r}; choose from {sorted(SCHEMES)}")
    if name == "srbp":
        return srbp(sub, gains, phi=phi, trace=trace)
    return SCHEMES[name](sub, gains)
