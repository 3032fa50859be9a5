"""Single-cell Manhattan-grid drops and slow-fading link gains.

All powers are handled in mW internally; configuration uses dBm.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class PlacementError(RuntimeError):
    """Raised when users cannot be placed on the street area."""


def dbm_to_linear(p_dbm):
    """Convert dBm to mW (scalar or array)."""
    return 10.0 ** (np.asarray(p_dbm, dtype=float) / 10.0)


def linear_to_dbm(p_mw):
    """Convert mW to dBm (scalar or array)."""
    return 10.0 * np.log10(np.asarray(p_mw, dtype=float))


@dataclass(frozen=True)
class LinkClass:
    """Log-distance path loss with log-normal shadowing for one link class.

    ``PL(d) = intercept_db + 10 * exponent * log10(d)``, with ``d`` in meters
    (clamped to 1 m) and ``nlos_extra_db`` added when the straight segment
    between the endpoints crosses a building footprint.
    """

    intercept_db: float
    exponent: float
    shadowing_sigma_db: float
    nlos_extra_db: float = 0.0

    def pathloss_db(self, d, nlos=False):
        d = np.maximum(np.asarray(d, dtype=float), 1.0)
        pl = self.intercept_db + 10.0 * self.exponent * np.log10(d)
        return pl + self.nlos_extra_db * np.asarray(nlos, dtype=float)

    def gain(self, d, shadow_db=0.0, nlos=False):
        """Linear power gain for distance ``d`` and a shadowing draw in dB."""
        return 10.0 ** (-(self.pathloss_db(d, nlos) + shadow_db) / 10.0)


@dataclass(frozen=True)
class ChannelConfig:
    # Defaults: urban macro fit for eNB links, a street-level
    # log-distance fit (exponent 4) for UE-UE links.
    ue_enb: LinkClass = LinkClass(24.4, 3.56, 8.0, 0.0)
    ue_ue: LinkClass = LinkClass(38.8, 4.0, 4.0, 20.0)
    # extra loss on the V-UE pair link toward its least favorable receiver
    v2v_blockage_db: float = 0.0

    @classmethod
    def from_dict(cls, d):
        kw = {}
        for key in ("ue_enb", "ue_ue"):
            if key in d:
                c = d[key]
                kw[key] = LinkClass(
                    intercept_db=float(c["pathloss_intercept_dB"]),
                    exponent=float(c["pathloss_exponent"]),
                    shadowing_sigma_db=float(c["shadowing_sigma_dB"]),
                    nlos_extra_db=float(c.get("nlos_extra_loss_dB", 0.0)),
                )
        if "v2v_blockage_dB" in d:
            kw["v2v_blockage_db"] = float(d["v2v_blockage_dB"])
        return cls(**kw)

    def to_dict(self):
        out = {
            key: {
                "pathloss_intercept_dB": lc.intercept_db,
                "pathloss_exponent": lc.exponent,
                "shadowing_sigma_dB": lc.shadowing_sigma_db,
                "nlos_extra_loss_dB": lc.nlos_extra_db,
            }
            for key, lc in (("ue_enb", self.ue_enb), ("ue_ue", self.ue_ue))
        }
        out["v2v_blockage_dB"] = self.v2v_blockage_db
        return out


def proportional_fair_shares(num_rbs, num_users):
    """Split ``num_rbs`` as evenly as possible; the first users get the remainder."""
    if num_users < 1:
        raise ValueError("need at least one C-UE")
    base, extra = divmod(num_rbs, num_users)
    return [base + (1 if i < extra else 0) for i in range(num_users)]


@dataclass
class Scenario:
    """Cell layout, user population and RB grid of one experiment.

    ``cue_rbs`` and ``vue_rbs`` are the per-time-unit RB counts of every C-UE
    and every real V-UE; the dummy V-UE is implicit and absorbs
    ``num_subbands - sum(vue_rbs)`` sub-bands.
    """

    num_subbands: int
    cue_rbs: list[int]
    vue_rbs: list[int]
    region_side_m: float = 444.0
    building_side_m: float = 120.0
    enb_position: tuple[float, float] | None = None
    enb_height_m: float = 26.0
    ue_height_m: float = 1.5
    v2v_distance_m: float = 18.0
    pmax_cue_dbm: float = 24.0
    pmax_vue_dbm: float = 24.0
    noise_dbm: float = -117.0
    time_unit_ms: float = 0.5
    rrm_period_ms: float = 100.0
    seed: int = 0
    _grid: "ManhattanGrid" = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.cue_rbs = [int(e) for e in self.cue_rbs]
        self.vue_rbs = [int(e) for e in self.vue_rbs]
        if self.enb_position is None:
            c = self.region_side_m / 2.0
            self.enb_position = (c, c)
        self.enb_position = tuple(float(v) for v in self.enb_position)
        self.validate()
        self._grid = ManhattanGrid(self.region_side_m, self.building_side_m)

    @property
    def num_cues(self):
        return len(self.cue_rbs)

    @property
    def num_vues(self):
        return len(self.vue_rbs)

    @property
    def dummy_rbs(self):
        return self.num_subbands - sum(self.vue_rbs)

    @property
    def pmax_cue(self):
        return float(dbm_to_linear(self.pmax_cue_dbm))

    @property
    def pmax_vue(self):
        return float(dbm_to_linear(self.pmax_vue_dbm))

    @property
    def noise(self):
        return float(dbm_to_linear(self.noise_dbm))

    @property
    def grid(self):
        return self._grid

    def validate(self):
        if self.num_subbands < 1:
            raise ValueError("num_subbands must be >= 1")
        if self.num_cues < 1:
            raise ValueError("need at least one C-UE")
        if any(e < 1 for e in self.cue_rbs) or any(e < 1 for e in self.vue_rbs):
            raise ValueError("every user needs at least one RB per time unit")
        if sum(self.cue_rbs) != self.num_subbands:
            raise ValueError(
                f"C-UE RB shares sum to {sum(self.cue_rbs)}, expected {self.num_subbands}"
            )
        if sum(self.vue_rbs) > self.num_subbands:
            raise ValueError(
                f"V-UEs demand {sum(self.vue_rbs)} RBs but only {self.num_subbands} sub-bands exist"
            )
        for name in ("pmax_cue_dbm", "pmax_vue_dbm", "noise_dbm"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.region_side_m <= 0 or self.building_side_m < 0:
            raise ValueError("region and building sizes must be positive")

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "cue_rbs" not in d:
            d["cue_rbs"] = proportional_fair_shares(d["num_subbands"], d.pop("num_cues"))
        else:
            d.pop("num_cues", None)
        if "vue_rbs" not in d:
            d["vue_rbs"] = [int(d.pop("rbs_per_vue"))] * int(d.pop("num_vues"))
        return cls(**d)


class ManhattanGrid:
    """Square region of equally sized square buildings separated by streets.

    Streets run along the region border and between buildings, so every
    street strip spans the whole region.
    """

    def __init__(self, region_side, building_side):
        self.side = float(region_side)
        n = int(region_side // building_side) if building_side > 0 else 0
        if n > 0 and n * building_side >= region_side:
            n -= 1
        self.num_buildings = n
        self.building_side = float(building_side)
        self.street_width = (self.side - n * building_side) / (n + 1)
        lo = self.street_width + np.arange(n) * (building_side + self.street_width)
        self.building_lo = lo
        self.building_hi = lo + building_side
        # street strip lower edges
        self.street_lo = np.arange(n + 1) * (building_side + self.street_width)

    def in_building(self, xy):
        xy = np.atleast_2d(xy)
        def inside(v):
            return ((v[:, None] > self.building_lo) & (v[:, None] < self.building_hi)).any(axis=1)
        return inside(xy[:, 0]) & inside(xy[:, 1])

    def on_street(self, xy):
        xy = np.atleast_2d(xy)
        in_region = ((xy >= 0) & (xy <= self.side)).all(axis=1)
        return in_region & ~self.in_building(xy)

    def sample_street_points(self, rng, n, max_tries=1000):
        out = np.empty((0, 2))
        for _ in range(max_tries):
            if len(out) >= n:
                break
            cand = rng.uniform(0.0, self.side, size=(2 * (n - len(out)) + 8, 2))
            out = np.vstack([out, cand[self.on_street(cand)]])
        if len(out) < n:
            raise PlacementError(f"could not place {n} users on the street area")
        return out[:n]

    def place_pair(self, rng, tx, distance, max_tries=100):
        """Receiver at ``distance`` from ``tx`` along a street through ``tx``."""
        for _ in range(max_tries):
            axes = []
            for axis in (0, 1):
                # a street along ``axis`` contains tx when its other coordinate is in a strip
                v = tx[1 - axis]
                if ((v >= self.street_lo) & (v <= self.street_lo + self.street_width)).any():
                    axes.append(axis)
            if not axes:
                raise PlacementError("transmitter is not on a street")
            axis = axes[rng.integers(len(axes))]
            sign = 1.0 if rng.random() < 0.5 else -1.0
            for s in (sign, -sign):
                rx = np.array(tx, dtype=float)
                rx[axis] += s * distance
                if self.on_street(rx)[0]:
                    return rx
        raise PlacementError(
            f"no street segment of length {distance} m through {tuple(tx)}"
        )

    def blocked(self, p, q):
        """True where segment ``p[i] -> q[i]`` crosses a building interior."""
        p = np.atleast_2d(np.asarray(p, dtype=float))
        q = np.atleast_2d(np.asarray(q, dtype=float))
        p, q = np.broadcast_arrays(p, q)
        if self.num_buildings == 0:
            return np.zeros(len(p), dtype=bool)
        shape = p.shape[:-1]
        p = p.reshape(-1, 2)
        q = q.reshape(-1, 2)
        bx_lo, by_lo = np.meshgrid(self.building_lo, self.building_lo, indexing="ij")
        lo = np.stack([bx_lo.ravel(), by_lo.ravel()], axis=-1)  # (B, 2)
        hi = lo + self.building_side
        d = (q - p)[:, None, :]  # (S, 1, 2)
        p0 = p[:, None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (lo[None] - p0) / d
            t2 = (hi[None] - p0) / d
        tmin = np.where(d == 0, -np.inf, np.minimum(t1, t2))
        tmax = np.where(d == 0, np.inf, np.maximum(t1, t2))
        # a zero-length axis must lie strictly inside the slab
        flat_in = (p0 > lo[None]) & (p0 < hi[None])
        ok_axis = (d != 0) | flat_in
        enter = np.maximum(tmin.max(axis=-1), 0.0)
        leave = np.minimum(tmax.min(axis=-1), 1.0)
        hit = ok_axis.all(axis=-1) & (enter < leave)
        return hit.any(axis=1).reshape(shape)


@dataclass
class Positions:
    cue: np.ndarray  # (M', 2)
    vue_tx: np.ndarray  # (K', 2)
    vue_rx: np.ndarray  # (K', 2)


@dataclass
class LinkGains:
    """Slow-fading (path loss and shadowing) power gains of one drop.

    Attributes
    ----------
    cue_enb : (M',) C-UE -> eNB desired links.
    vue_enb : (K',) V-UE transmitter -> eNB interference links.
    vue_pair : (K',) V-UE transmitter -> its worst-case receiver.
    cue_vue : (M', K') C-UE -> V-UE receiver interference links.
    noise : linear noise power in mW.
    """

    cue_enb: np.ndarray
    vue_enb: np.ndarray
    vue_pair: np.ndarray
    cue_vue: np.ndarray
    noise: float

    def __post_init__(self):
        for name in ("cue_enb", "vue_enb", "vue_pair", "cue_vue"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if (arr < 0).any() or not np.isfinite(arr).all():
                raise ValueError(f"{name} must be finite and non-negative")
            setattr(self, name, arr)
        if not self.noise > 0:
            raise ValueError("noise power must be positive")

    @property
    def num_cues(self):
        return len(self.cue_enb)

    @property
    def num_vues(self):
        return len(self.vue_enb)


def drop_rng(seed, drop_index):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(drop_index)]))


def generate_drop(scenario: Scenario, channel: ChannelConfig, drop_index: int):
    """Place users and draw slow-fading gains for one drop.

    The drop is a pure function of ``(scenario.seed, drop_index)``.

    Returns
    -------
    positions : Positions
    gains : LinkGains
    """
    rng = drop_rng(scenario.seed, drop_index)
    grid = scenario.grid
    if grid.side < scenario.v2v_distance_m:
        raise PlacementError("region is smaller than the V2V pair distance")

    cue = grid.sample_street_points(rng, scenario.num_cues)
    vue_tx = grid.sample_street_points(rng, scenario.num_vues) if scenario.num_vues else np.empty((0, 2))
    vue_rx = np.array([grid.place_pair(rng, tx, scenario.v2v_distance_m) for tx in vue_tx]).reshape(-1, 2)
    pos = Positions(cue, vue_tx, vue_rx)

    enb = np.asarray(scenario.enb_position)
    dh = scenario.enb_height_m - scenario.ue_height_m

    def to_enb(xy):
        d = np.sqrt(((xy - enb) ** 2).sum(axis=-1) + dh**2)
        nlos = grid.blocked(xy, enb[None, :]) if len(xy) else np.zeros(0, bool)
        return d, nlos

    d_c, nlos_c = to_enb(cue)
    d_v, nlos_v = to_enb(vue_tx)
    d_pair = np.linalg.norm(vue_tx - vue_rx, axis=-1)
    nlos_pair = grid.blocked(vue_tx, vue_rx) if scenario.num_vues else np.zeros(0, bool)
    cv_p = np.broadcast_to(cue[:, None, :], (scenario.num_cues, scenario.num_vues, 2))
    cv_q = np.broadcast_to(vue_rx[None, :, :], cv_p.shape)
    d_cv = np.linalg.norm(cv_p - cv_q, axis=-1)
    nlos_cv = grid.blocked(cv_p, cv_q) if scenario.num_vues else np.zeros(d_cv.shape, bool)

    # i.i.d. shadowing per link, fixed draw order
    s_enb = channel.ue_enb.shadowing_sigma_db
    s_ue = channel.ue_ue.shadowing_sigma_db
    x_c = rng.normal(0.0, s_enb, size=d_c.shape)
    x_v = rng.normal(0.0, s_enb, size=d_v.shape)
    x_pair = rng.normal(0.0, s_ue, size=d_pair.shape)
    x_cv = rng.normal(0.0, s_ue, size=d_cv.shape)

    gains = LinkGains(
        cue_enb=channel.ue_enb.gain(d_c, x_c, nlos_c),
        vue_enb=channel.ue_enb.gain(d_v, x_v, nlos_v),
        vue_pair=channel.ue_ue.gain(d_pair, x_pair + channel.v2v_blockage_db, nlos_pair),
        cue_vue=channel.ue_ue.gain(d_cv, x_cv, nlos_cv).reshape(scenario.num_cues, scenario.num_vues),
        noise=scenario.noise,
    )
    return pos, gains
