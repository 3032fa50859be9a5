"""JSON experiment configuration.

Schema (all keys optional unless marked)::

    {
      "scenario": {                      # required
        "num_subbands": 100,             # required, F
        "num_cues": 10 | "cue_rbs": [..],
        "num_vues": 5, "rbs_per_vue": 2 | "vue_rbs": [..],
                                         # rbs_per_vue defaults to ceil(E_all / L_tol)
        "region_side_m": 444, "building_side_m": 120, "enb_height_m": 26,
        "ue_height_m": 1.5, "v2v_distance_m": 18,
        "pmax_cue_dBm": 24, "pmax_vue_dBm": 24, "noise_dBm": -117
      },
      "channel": {
        "ue_enb": {"pathloss_intercept_dB", "pathloss_exponent",
                   "shadowing_sigma_dB", "nlos_extra_loss_dB"},
        "ue_ue": {...}, "v2v_blockage_dB": 0
      },
      "qos": {"N": 12800, "p_o": 1e-5, "L_tol": 10, "rho": 84,
              "E_all": 20 | "E": 2, "gamma_T_dB": 34.3},
                                         # without gamma_T_dB it is derived by Monte Carlo
      "monte_carlo": {"num_samples": 1e7, "seed": 2015, "lo_dB": 0, "hi_dB": 60, "tol_dB": 0.05},
      "threshold_sweep": [20, 30, 40],   # E_all values for derive-threshold
      "schemes": ["srbp", "feng", "zulhasnine"],
      "num_drops": 200, "num_fading": 10000, "seed": 0,
      "phi": null, "cdf_points": 1000, "output_dir": "out"
    }
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .qos import McConfig, VueQos, rbs_per_time_unit
from .scenario import ChannelConfig, Scenario, proportional_fair_shares
from .schemes import SCHEMES


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass
class ExperimentConfig:
    scenario: Scenario
    channel: ChannelConfig
    qos: VueQos
    mc: McConfig = McConfig()
    schemes: list = field(default_factory=lambda: ["srbp"])
    num_drops: int = 1
    num_fading: int = 10_000
    seed: int = 0
    phi: float | None = None
    cdf_points: int = 1000
    output_dir: str = "out"
    threshold_sweep: list = field(default_factory=list)

    @property
    def qos_list(self):
        return [self.qos] * self.scenario.num_vues

    def with_threshold(self, gamma_t):
        self.qos = self.qos.with_threshold(gamma_t)
        return self


def _get(d, key, kind, where, default=None, required=False):
    if key not in d:
        if required:
            raise ConfigError(f"{where}.{key}: required field missing")
        return default
    v = d[key]
    try:
        if kind is int:
            if isinstance(v, bool) or float(v) != int(float(v)):
                raise ValueError
            return int(float(v))
        if kind is float:
            if isinstance(v, bool):
                raise ValueError
            v = float(v)
            if not math.isfinite(v):
                raise ValueError
            return v
    except (TypeError, ValueError):
        raise ConfigError(f"{where}.{key}: expected {kind.__name__}, got {v!r}") from None
    return v


def _positive(v, where):
    if v is not None and v <= 0:
        raise ConfigError(f"{where}: must be positive, got {v}")
    return v


_SCENARIO_FLOATS = {
    "region_side_m": "region_side_m", "building_side_m": "building_side_m",
    "enb_height_m": "enb_height_m", "ue_height_m": "ue_height_m",
    "v2v_distance_m": "v2v_distance_m", "pmax_cue_dBm": "pmax_cue_dbm",
    "pmax_vue_dBm": "pmax_vue_dbm", "noise_dBm": "noise_dbm",
}


def _int_list(d, key, where):
    v = d[key]
    if not isinstance(v, list) or not v or any(isinstance(e, bool) or not isinstance(e, int) or e < 1 for e in v):
        raise ConfigError(f"{where}.{key}: expected a non-empty list of positive integers")
    return v


def parse_config(raw) -> ExperimentConfig:
    """Validate a decoded JSON document and build an ExperimentConfig."""
    if not isinstance(raw, dict):
        raise ConfigError("top level: expected a JSON object")
    known = {"scenario", "channel", "qos", "monte_carlo", "schemes", "num_drops", "num_fading",
             "seed", "phi", "cdf_points", "output_dir", "threshold_sweep", "description"}
    extra = set(raw) - known
    if extra:
        raise ConfigError(f"top level: unknown field(s) {sorted(extra)}")

    q = raw.get("qos", {})
    if not isinstance(q, dict):
        raise ConfigError("qos: expected an object")
    l_tol = _positive(_get(q, "L_tol", int, "qos", 10), "qos.L_tol")
    e_all = _get(q, "E_all", int, "qos")
    e = _get(q, "E", int, "qos")
    if e_all is None:
        e_all = (e if e is not None else 2) * l_tol
    _positive(e_all, "qos.E_all")
    if e is not None and e != rbs_per_time_unit(e_all, l_tol):
        raise ConfigError(f"qos.E: {e} inconsistent with E_all={e_all}, L_tol={l_tol}")
    g_db = _get(q, "gamma_T_dB", float, "qos")
    try:
        qos = VueQos(
            n_bits=_get(q, "N", int, "qos", 12800),
            p_o=_get(q, "p_o", float, "qos", 1e-5),
            l_tol=l_tol,
            rho=_get(q, "rho", int, "qos", 84),
            e_all=e_all,
            gamma_t=None if g_db is None else 10.0 ** (g_db / 10.0),
        )
    except ValueError as exc:
        raise ConfigError(f"qos: {exc}") from None

    m = raw.get("monte_carlo", {})
    if not isinstance(m, dict):
        raise ConfigError("monte_carlo: expected an object")
    mc = McConfig(
        num_samples=_positive(_get(m, "num_samples", int, "monte_carlo", 10_000_000), "monte_carlo.num_samples"),
        seed=_get(m, "seed", int, "monte_carlo", 2015),
        bisection_lo_db=_get(m, "lo_dB", float, "monte_carlo", 0.0),
        bisection_hi_db=_get(m, "hi_dB", float, "monte_carlo", 60.0),
        tol_db=_positive(_get(m, "tol_dB", float, "monte_carlo", 0.05), "monte_carlo.tol_dB"),
    )
    if mc.bisection_hi_db <= mc.bisection_lo_db:
        raise ConfigError("monte_carlo.hi_dB: must exceed lo_dB")

    seed = _get(raw, "seed", int, "top level", 0)
    if seed < 0:
        raise ConfigError("seed: must be non-negative")

    s = raw.get("scenario")
    if not isinstance(s, dict):
        raise ConfigError("scenario: required object missing")
    f = _positive(_get(s, "num_subbands", int, "scenario", required=True), "scenario.num_subbands")
    if "cue_rbs" in s:
        cue_rbs = _int_list(s, "cue_rbs", "scenario")
    else:
        cue_rbs = proportional_fair_shares(f, _positive(_get(s, "num_cues", int, "scenario", required=True),
                                                        "scenario.num_cues"))
    if "vue_rbs" in s:
        vue_rbs = _int_list(s, "vue_rbs", "scenario")
    else:
        k = _get(s, "num_vues", int, "scenario", required=True)
        if k < 0:
            raise ConfigError("scenario.num_vues: must be non-negative")
        e_v = _get(s, "rbs_per_vue", int, "scenario", qos.rbs_per_unit)
        vue_rbs = [e_v] * k
    if any(e != qos.rbs_per_unit for e in vue_rbs):
        raise ConfigError(
            f"scenario.vue_rbs: QoS needs {qos.rbs_per_unit} RBs per time unit per V-UE, got {vue_rbs}"
        )
    known_s = {"num_subbands", "num_cues", "cue_rbs", "num_vues", "rbs_per_vue", "vue_rbs",
               "enb_position", *_SCENARIO_FLOATS}
    extra = set(s) - known_s
    if extra:
        raise ConfigError(f"scenario: unknown field(s) {sorted(extra)}")
    kw = {dst: _get(s, src, float, "scenario") for src, dst in _SCENARIO_FLOATS.items() if src in s}
    if "enb_position" in s:
        kw["enb_position"] = s["enb_position"]
    try:
        scenario = Scenario(num_subbands=f, cue_rbs=cue_rbs, vue_rbs=vue_rbs, seed=seed, **kw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"scenario: {exc}") from None

    ch = raw.get("channel", {})
    if not isinstance(ch, dict):
        raise ConfigError("channel: expected an object")
    try:
        channel = ChannelConfig.from_dict(ch)
    except KeyError as exc:
        raise ConfigError(f"channel: missing field {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"channel: {exc}") from None

    schemes = raw.get("schemes", ["srbp"])
    if isinstance(schemes, str):
        schemes = [schemes]
    if not isinstance(schemes, list) or not schemes:
        raise ConfigError("schemes: expected a non-empty list")
    for name in schemes:
        if name not in SCHEMES:
            raise ConfigError(f"schemes: unknown scheme {name!r}; choose from {sorted(SCHEMES)}")

    num_drops = _get(raw, "num_drops", int, "top level", 1)
    if num_drops < 1:
        raise ConfigError("num_drops: must be >= 1")
    sweep = raw.get("threshold_sweep", [])
    if not isinstance(sweep, list) or any(isinstance(v, bool) or not isinstance(v, int) or v < 1 for v in sweep):
        raise ConfigError("threshold_sweep: expected a list of positive integers")
    phi = _get(raw, "phi", float, "top level")
    return ExperimentConfig(
        scenario=scenario,
        channel=channel,
        qos=qos,
        mc=mc,
        schemes=list(schemes),
        num_drops=num_drops,
        num_fading=_positive(_get(raw, "num_fading", int, "top level", 10_000), "num_fading"),
        seed=seed,
        phi=_positive(phi, "phi"),
        cdf_points=_positive(_get(raw, "cdf_points", int, "top level", 1000), "cdf_points"),
        output_dir=str(raw.get("output_dir", "out")),
        threshold_sweep=list(sweep),
    )


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return parse_config(raw)
