"""World description: geometry, channel/energy parameters, and scenario file I/O.

This module is the single home of every physical symbol. Quantities are SI
internally (W, Hz, m, s, bits); dB and dBm appear only at the file boundary
and are converted on load.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from importlib import resources

import numpy as np

from .errors import ScenarioError

__all__ = [
    "GroundNode",
    "Jammer",
    "ChannelParams",
    "EnergyParams",
    "UavParams",
    "Horizon",
    "Scenario",
    "make_horizon",
    "default_scenario",
    "case_scenario",
    "load_scenario",
    "save_scenario",
    "scenario_to_dict",
    "load_solver_overrides",
    "db_to_linear",
    "linear_to_db",
    "dbm_to_watts",
    "watts_to_dbm",
]


def db_to_linear(db):
    return 10.0 ** (db / 10.0)


def linear_to_db(value):
    return 10.0 * math.log10(value)


def dbm_to_watts(dbm):
    return 10.0 ** (dbm / 10.0) * 1e-3


def watts_to_dbm(watts):
    return 10.0 * math.log10(watts * 1e3)


# Default parameter set used throughout the experiments.
DEFAULT_DT = 0.5                                  # s
DEFAULT_BANDWIDTH = 1.0e5                         # Hz
DEFAULT_NOISE_POWER = dbm_to_watts(-119.0)        # W (noise density -169 dBm/Hz over 0.1 MHz)
DEFAULT_SOURCE_POWER = 0.1                        # W
DEFAULT_JAMMER_POWER = 0.1                        # W
DEFAULT_C1 = 9.26e-4                              # W s^3 / m^3
DEFAULT_C2 = 2250.0                               # W m / s
DEFAULT_ALTITUDE = 100.0                          # m
DEFAULT_V_MAX = 100.0                             # m/s
DEFAULT_V_MIN = 3.0                               # m/s
DEFAULT_A_MAX = 5.0                               # m/s^2
DEFAULT_BETA0 = db_to_linear(-60.0)               # channel gain at 1 m
DEFAULT_GRAVITY = 9.8                             # m/s^2
DEFAULT_MASS = 0.0                                # kg; kinetic-energy correction off by default
DEFAULT_OUTER_TOL = 1e-3                          # fractional objective increase
DEFAULT_INNER_TOL = 10.0                          # |F(lambda)| threshold, rate-sum units

DEFAULT_SOURCE = (0.0, 1000.0)
DEFAULT_START = (-500.0, 0.0)
DEFAULT_END = (500.0, 0.0)
DEFAULT_T = 150.0

# Preset jammer layouts and horizons for the four benchmark cases.
_CASE_JAMMERS = {
    1: ((0.0, 0.0),),
    2: ((0.0, 0.0),),
    3: ((0.0, 0.0), (500.0, 500.0)),
    4: ((0.0, 0.0), (500.0, 500.0), (300.0, 800.0)),
}
_CASE_T = {1: 150.0, 2: 200.0, 3: 200.0, 4: 200.0}


def _require_finite(label, *values):
    for v in values:
        if not math.isfinite(v):
            raise ScenarioError(f"{label} must be finite, got {v!r}")


def _require_positive(label, *values):
    _require_finite(label, *values)
    for v in values:
        if v <= 0.0:
            raise ScenarioError(f"{label} must be strictly positive, got {v!r}")


@dataclass(frozen=True)
class GroundNode:
    """A fixed node on the ground plane (z = 0)."""

    x: float
    y: float

    def __post_init__(self):
        _require_finite("ground node coordinate", self.x, self.y)

    @property
    def xy(self):
        return np.array([self.x, self.y], dtype=float)


@dataclass(frozen=True)
class Jammer:
    """A ground jammer with a fixed transmit power in watts."""

    node: GroundNode
    power: float

    def __post_init__(self):
        _require_positive("jammer power", self.power)


@dataclass(frozen=True)
class ChannelParams:
    bandwidth: float      # Hz
    beta0: float          # linear power gain at the 1 m reference distance
    noise_power: float    # W
    source_power: float   # W

    def __post_init__(self):
        _require_positive("channel bandwidth", self.bandwidth)
        _require_positive("channel beta0", self.beta0)
        _require_positive("channel noise_power", self.noise_power)
        _require_positive("channel source_power", self.source_power)


@dataclass(frozen=True)
class EnergyParams:
    """Fixed-wing propulsion model constants: c1*v^3 + (c2/v)*(1 + a^2/g^2)."""

    c1: float        # W s^3 / m^3
    c2: float        # W m / s
    gravity: float   # m/s^2
    mass: float      # kg; scales the kinetic-energy correction term

    def __post_init__(self):
        _require_positive("energy c1", self.c1)
        _require_positive("energy c2", self.c2)
        _require_positive("gravity", self.gravity)
        _require_finite("mass", self.mass)
        if self.mass < 0.0:
            raise ScenarioError(f"mass must be >= 0, got {self.mass!r}")


@dataclass(frozen=True)
class UavParams:
    altitude: float   # m, fixed level-flight altitude
    v_max: float      # m/s
    v_min: float      # m/s
    a_max: float      # m/s^2
    start: tuple      # (x, y) m
    end: tuple        # (x, y) m

    def __post_init__(self):
        _require_positive("uav altitude", self.altitude)
        _require_positive("uav v_min", self.v_min)
        _require_positive("uav a_max", self.a_max)
        _require_finite("uav endpoint coordinate", *self.start, *self.end)
        if not self.v_min < self.v_max:
            raise ScenarioError(
                f"speed bounds must satisfy 0 < v_min < v_max, got "
                f"v_min={self.v_min!r}, v_max={self.v_max!r}"
            )
        object.__setattr__(self, "start", (float(self.start[0]), float(self.start[1])))
        object.__setattr__(self, "end", (float(self.end[0]), float(self.end[1])))

    @property
    def start_xy(self):
        return np.array(self.start, dtype=float)

    @property
    def end_xy(self):
        return np.array(self.end, dtype=float)


@dataclass(frozen=True)
class Horizon:
    """Flight duration T split into n_slots equal slots of length dt."""

    T: float
    n_slots: int
    dt: float

    def __post_init__(self):
        _require_positive("horizon T", self.T)
        _require_positive("horizon dt", self.dt)
        if int(self.n_slots) != self.n_slots or self.n_slots < 2:
            raise ScenarioError(f"n_slots must be an integer >= 2, got {self.n_slots!r}")
        object.__setattr__(self, "n_slots", int(self.n_slots))
        if abs(self.T - self.n_slots * self.dt) > 1e-9 * max(1.0, self.T):
            raise ScenarioError(
                f"horizon must satisfy T = n_slots * dt exactly, got "
                f"T={self.T!r}, n_slots={self.n_slots!r}, dt={self.dt!r}"
            )


def make_horizon(T=None, dt=None, n_slots=None):
    """Build a Horizon from any two of (T, dt, n_slots); all three are validated."""
    if T is not None and dt is not None and n_slots is None:
        n = T / dt
        n_slots = int(round(n))
        if abs(n - n_slots) > 1e-9 * max(1.0, n):
            raise ScenarioError(f"T/dt = {n!r} is not an integer slot count")
    elif T is not None and n_slots is not None and dt is None:
        dt = T / n_slots
    elif dt is not None and n_slots is not None and T is None:
        T = dt * n_slots
    elif T is None or dt is None or n_slots is None:
        raise ScenarioError("horizon needs at least two of T, dt, n_slots")
    return Horizon(T=float(T), n_slots=int(n_slots), dt=float(dt))


@dataclass(frozen=True)
class Scenario:
    """Complete world description for one planning problem."""

    source: GroundNode
    jammers: tuple
    channel: ChannelParams
    energy: EnergyParams
    uav: UavParams
    horizon: Horizon

    def __post_init__(self):
        object.__setattr__(self, "jammers", tuple(self.jammers))
        dist = float(np.linalg.norm(self.uav.end_xy - self.uav.start_xy))
        limit = self.uav.v_max * self.horizon.T
        if dist > limit * (1.0 + 1e-12):
            raise ScenarioError(
                f"endpoints unreachable: straight-line distance {dist:.6g} m exceeds "
                f"v_max * T = {limit:.6g} m"
            )

    @property
    def n_jammers(self):
        return len(self.jammers)

    def jammer_xy(self):
        """Jammer ground positions as an (M, 2) array."""
        if not self.jammers:
            return np.zeros((0, 2))
        return np.array([[j.node.x, j.node.y] for j in self.jammers])

    def jammer_powers(self):
        return np.array([j.power for j in self.jammers])

    def without_jammers(self):
        return replace(self, jammers=())

    def with_jammers(self, jammers):
        return replace(self, jammers=tuple(jammers))


def default_scenario():
    """The baseline configuration (one jammer at the origin, T = 150 s)."""
    return case_scenario(1)


def case_scenario(case, T=None, dt=None):
    """One of the four benchmark cases; T and dt may be overridden."""
    if case not in _CASE_JAMMERS:
        raise ScenarioError(f"unknown case {case!r}; valid cases are 1-4")
    if T is None:
        T = _CASE_T[case]
    if dt is None:
        dt = DEFAULT_DT
    jammers = tuple(
        Jammer(GroundNode(x, y), DEFAULT_JAMMER_POWER) for x, y in _CASE_JAMMERS[case]
    )
    return Scenario(
        source=GroundNode(*DEFAULT_SOURCE),
        jammers=jammers,
        channel=ChannelParams(
            bandwidth=DEFAULT_BANDWIDTH,
            beta0=DEFAULT_BETA0,
            noise_power=DEFAULT_NOISE_POWER,
            source_power=DEFAULT_SOURCE_POWER,
        ),
        energy=EnergyParams(
            c1=DEFAULT_C1, c2=DEFAULT_C2, gravity=DEFAULT_GRAVITY, mass=DEFAULT_MASS
        ),
        uav=UavParams(
            altitude=DEFAULT_ALTITUDE,
            v_max=DEFAULT_V_MAX,
            v_min=DEFAULT_V_MIN,
            a_max=DEFAULT_A_MAX,
            start=DEFAULT_START,
            end=DEFAULT_END,
        ),
        horizon=make_horizon(T=T, dt=dt),
    )


# ---------------------------------------------------------------------------
# Scenario files
#
# A scenario file is a JSON object with top-level keys `source`, `jammers`,
# `channel`, `energy`, `uav`, `horizon`, `solver`; any omitted field takes the
# default above. Powers may be given as plain watts or {"dbm": v} / {"watts": v};
# gains as plain linear values or {"db": v} / {"linear": v}. The `solver` block
# is not part of the Scenario; see `load_solver_overrides`.
# ---------------------------------------------------------------------------

_TOP_KEYS = {"source", "jammers", "channel", "energy", "uav", "horizon", "solver"}


def _parse_power(value, label):
    if isinstance(value, dict):
        keys = set(value)
        if keys == {"watts"}:
            return float(value["watts"])
        if keys == {"dbm"}:
            return dbm_to_watts(float(value["dbm"]))
        raise ScenarioError(f"{label}: expected 'watts' or 'dbm', got {sorted(keys)}")
    return float(value)


def _parse_gain(value, label):
    if isinstance(value, dict):
        keys = set(value)
        if keys == {"linear"}:
            return float(value["linear"])
        if keys == {"db"}:
            return db_to_linear(float(value["db"]))
        raise ScenarioError(f"{label}: expected 'linear' or 'db', got {sorted(keys)}")
    return float(value)


def _check_keys(data, allowed, label):
    unknown = set(data) - set(allowed)
    if unknown:
        raise ScenarioError(f"unknown {label} keys: {sorted(unknown)}")


def scenario_from_dict(data):
    """Build a validated Scenario from a (possibly partial) dict."""
    if not isinstance(data, dict):
        raise ScenarioError(f"scenario document must be an object, got {type(data).__name__}")
    _check_keys(data, _TOP_KEYS, "scenario")
    base = default_scenario()

    src = data.get("source")
    if src is not None:
        _check_keys(src, {"x", "y"}, "source")
        source = GroundNode(float(src["x"]), float(src["y"]))
    else:
        source = base.source

    if "jammers" in data:
        jammers = []
        for i, j in enumerate(data["jammers"]):
            _check_keys(j, {"x", "y", "power"}, f"jammers[{i}]")
            power = _parse_power(j.get("power", DEFAULT_JAMMER_POWER), f"jammers[{i}].power")
            jammers.append(Jammer(GroundNode(float(j["x"]), float(j["y"])), power))
        jammers = tuple(jammers)
    else:
        jammers = base.jammers

    ch = data.get("channel", {})
    _check_keys(ch, {"bandwidth", "beta0", "noise_power", "source_power"}, "channel")
    channel = ChannelParams(
        bandwidth=float(ch.get("bandwidth", DEFAULT_BANDWIDTH)),
        beta0=_parse_gain(ch.get("beta0", DEFAULT_BETA0), "channel.beta0"),
        noise_power=_parse_power(ch.get("noise_power", DEFAULT_NOISE_POWER), "channel.noise_power"),
        source_power=_parse_power(
            ch.get("source_power", DEFAULT_SOURCE_POWER), "channel.source_power"
        ),
    )

    en = data.get("energy", {})
    _check_keys(en, {"c1", "c2", "gravity", "mass"}, "energy")
    energy = EnergyParams(
        c1=float(en.get("c1", DEFAULT_C1)),
        c2=float(en.get("c2", DEFAULT_C2)),
        gravity=float(en.get("gravity", DEFAULT_GRAVITY)),
        mass=float(en.get("mass", DEFAULT_MASS)),
    )

    uav_d = data.get("uav", {})
    _check_keys(uav_d, {"altitude", "v_max", "v_min", "a_max", "start", "end"}, "uav")
    uav = UavParams(
        altitude=float(uav_d.get("altitude", DEFAULT_ALTITUDE)),
        v_max=float(uav_d.get("v_max", DEFAULT_V_MAX)),
        v_min=float(uav_d.get("v_min", DEFAULT_V_MIN)),
        a_max=float(uav_d.get("a_max", DEFAULT_A_MAX)),
        start=tuple(uav_d.get("start", DEFAULT_START)),
        end=tuple(uav_d.get("end", DEFAULT_END)),
    )

    hz = data.get("horizon", {})
    _check_keys(hz, {"T", "dt", "n_slots"}, "horizon")
    if hz:
        if all(k in hz for k in ("T", "dt", "n_slots")):
            horizon = Horizon(float(hz["T"]), int(hz["n_slots"]), float(hz["dt"]))
        else:
            horizon = make_horizon(
                T=hz.get("T"), dt=hz.get("dt"), n_slots=hz.get("n_slots")
            )
    else:
        horizon = make_horizon(T=DEFAULT_T, dt=DEFAULT_DT)

    return Scenario(source, jammers, channel, energy, uav, horizon)


def load_scenario(path):
    """Load and validate a scenario file (JSON; missing fields take defaults)."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: malformed scenario file: {exc}") from exc
    return scenario_from_dict(data)


def load_solver_overrides(path):
    """Return the optional `solver` block of a scenario file as a plain dict."""
    with open(path) as fh:
        data = json.load(fh)
    block = data.get("solver", {})
    if not isinstance(block, dict):
        raise ScenarioError("solver block must be an object")
    return block


def scenario_to_dict(scn):
    """Plain-SI dict form of a Scenario (inverse of scenario_from_dict)."""
    return {
        "source": {"x": scn.source.x, "y": scn.source.y},
        "jammers": [
            {"x": j.node.x, "y": j.node.y, "power": j.power} for j in scn.jammers
        ],
        "channel": {
            "bandwidth": scn.channel.bandwidth,
            "beta0": scn.channel.beta0,
            "noise_power": scn.channel.noise_power,
            "source_power": scn.channel.source_power,
        },
        "energy": {
            "c1": scn.energy.c1,
            "c2": scn.energy.c2,
            "gravity": scn.energy.gravity,
            "mass": scn.energy.mass,
        },
        "uav": {
            "altitude": scn.uav.altitude,
            "v_max": scn.uav.v_max,
            "v_min": scn.uav.v_min,
            "a_max": scn.uav.a_max,
            "start": list(scn.uav.start),
            "end": list(scn.uav.end),
        },
        "horizon": {"T": scn.horizon.T, "dt": scn.horizon.dt, "n_slots": scn.horizon.n_slots},
    }


def save_scenario(scn, path):
    with open(path, "w") as fh:
        json.dump(scenario_to_dict(scn), fh, indent=2)
        fh.write("\n")


def preset_path(case):
    """Filesystem path of a shipped case preset file."""
    if case not in _CASE_JAMMERS:
        raise ScenarioError(f"unknown case {case!r}; valid cases are 1-4")
    return str(resources.files("uavee.presets").joinpath(f"case{case}.json"))
