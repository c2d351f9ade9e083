"""Exact evaluators for channel gain, rate, propulsion energy, and feasibility.

These are the non-approximated oracles every surrogate model in the planner is
tested against. All functions are pure and vectorized over slots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PropulsionDomainError
from .scenario import GroundNode, Scenario

__all__ = [
    "Trajectory",
    "FamilyResidual",
    "FeasibilityReport",
    "channel_gain",
    "slot_rates",
    "slot_rate",
    "propulsion_power",
    "trajectory_energy",
    "throughput_bits",
    "energy_efficiency",
    "kinematic_residuals",
]

LOG2E = np.log2(np.e)


@dataclass(frozen=True)
class Trajectory:
    """Per-slot horizontal positions, velocities, and accelerations.

    Arrays have shape (N, 2); the altitude is carried by the scenario. Arrays
    are frozen on construction so trajectories can be shared safely.
    """

    q: np.ndarray
    v: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        v = np.array(self.v, dtype=float)
        a = np.array(self.a, dtype=float)
        if not (q.shape == v.shape == a.shape) or q.ndim != 2 or q.shape[1] != 2:
            raise ValueError(
                f"trajectory arrays must share shape (N, 2), got "
                f"{q.shape}, {v.shape}, {a.shape}"
            )
        for name, arr in (("q", q), ("v", v), ("a", a)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"trajectory array {name} contains non-finite entries")
            arr.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "a", a)

    @property
    def n_slots(self):
        return self.q.shape[0]

    def speeds(self):
        return np.linalg.norm(self.v, axis=1)

    def reversed(self):
        """Time-reversed trajectory (positions reversed, motion negated)."""
        return Trajectory(self.q[::-1].copy(), -self.v[::-1], -self.a[::-1])


@dataclass(frozen=True)
class FamilyResidual:
    value: float
    slot: int


@dataclass(frozen=True)
class FeasibilityReport:
    """Worst residual of each mobility-constraint family (0-based slot index)."""

    dynamics: FamilyResidual       # position recursion
    velocity: FamilyResidual       # velocity recursion
    start: FamilyResidual          # first-slot boundary condition
    end: FamilyResidual            # terminal position
    accel: FamilyResidual          # ||a|| <= a_max
    speed_max: FamilyResidual      # ||v|| <= v_max
    speed_min: FamilyResidual      # ||v|| >= v_min

    def families(self):
        return {
            "dynamics": self.dynamics,
            "velocity": self.velocity,
            "start": self.start,
            "end": self.end,
            "accel": self.accel,
            "speed_max": self.speed_max,
            "speed_min": self.speed_min,
        }

    def max_residual(self):
        return max(f.value for f in self.families().values())


def channel_gain(uav_xy, altitude, ground: GroundNode, beta0):
    """Path-loss channel gain beta0 / (||uav - ground||^2 + altitude^2).

    `uav_xy` may be a single point or an (..., 2) array.
    """
    uav_xy = np.asarray(uav_xy, dtype=float)
    d2 = np.sum((uav_xy - ground.xy) ** 2, axis=-1) + altitude**2
    return beta0 / d2


def slot_rates(uav_xy, scn: Scenario):
    """Achievable rate in bit/s at each given position under jamming."""
    ch = scn.channel
    signal = ch.source_power * channel_gain(uav_xy, scn.uav.altitude, scn.source, ch.beta0)
    interference = np.zeros(np.shape(signal))
    for jam in scn.jammers:
        interference = interference + jam.power * channel_gain(
            uav_xy, scn.uav.altitude, jam.node, ch.beta0
        )
    return ch.bandwidth * np.log2(1.0 + signal / (interference + ch.noise_power))


def slot_rate(uav_xy, scn: Scenario):
    """Scalar convenience wrapper around `slot_rates`."""
    return float(slot_rates(np.asarray(uav_xy, dtype=float), scn))


def propulsion_power(v, a, energy):
    """Instantaneous propulsion power c1*s^3 + (c2/s)*(1 + ||a||^2/g^2), s = ||v||.

    Raises PropulsionDomainError at zero speed, where the model diverges.
    """
    v = np.asarray(v, dtype=float)
    a = np.asarray(a, dtype=float)
    speed = np.linalg.norm(v, axis=-1)
    if np.any(speed == 0.0):
        slot = None
        if speed.ndim > 0:
            slot = int(np.flatnonzero(speed == 0.0)[0])
        raise PropulsionDomainError("propulsion power undefined at zero speed", slot=slot)
    a2 = np.sum(a * a, axis=-1)
    out = energy.c1 * speed**3 + (energy.c2 / speed) * (1.0 + a2 / energy.gravity**2)
    return out if out.ndim else float(out)


def trajectory_energy(traj: Trajectory, energy, dt):
    """Total propulsion energy in joules, including the kinetic-energy change."""
    try:
        power = propulsion_power(traj.v, traj.a, energy)
    except PropulsionDomainError as exc:
        raise PropulsionDomainError(
            f"zero speed at slot {exc.slot}", slot=exc.slot
        ) from None
    kinetic = 0.0
    if energy.mass != 0.0:
        s = traj.speeds()
        kinetic = 0.5 * energy.mass * (s[-1] ** 2 - s[0] ** 2)
    return dt * float(np.sum(power)) + kinetic


def throughput_bits(traj: Trajectory, scn: Scenario):
    """Total delivered bits: dt * sum of per-slot rates."""
    if traj.n_slots != scn.horizon.n_slots:
        raise ValueError(
            f"trajectory has {traj.n_slots} slots, scenario expects {scn.horizon.n_slots}"
        )
    return scn.horizon.dt * float(np.sum(slot_rates(traj.q, scn)))


def energy_efficiency(traj: Trajectory, scn: Scenario):
    """Delivered bits per joule of propulsion energy."""
    return throughput_bits(traj, scn) / trajectory_energy(traj, scn.energy, scn.horizon.dt)


def _worst(values):
    values = np.atleast_1d(np.asarray(values, dtype=float))
    i = int(np.argmax(values))
    return FamilyResidual(float(values[i]), i)


def kinematic_residuals(traj: Trajectory, uav, horizon) -> FeasibilityReport:
    """Residuals of every mobility constraint; all zero for a feasible trajectory."""
    q, v, a = traj.q, traj.v, traj.a
    dt = horizon.dt
    speed = traj.speeds()
    accel = np.linalg.norm(a, axis=1)

    dyn = np.linalg.norm(q[1:] - q[:-1] - v[1:] * dt - 0.5 * a[1:] * dt**2, axis=1)
    vel = np.linalg.norm(v[1:] - v[:-1] - a[1:] * dt, axis=1)
    start = np.linalg.norm(q[0] - uav.start_xy - v[0] * dt - 0.5 * a[0] * dt**2)
    end = np.linalg.norm(q[-1] - uav.end_xy)

    dyn_res = _worst(np.concatenate([[0.0], dyn]))
    vel_res = _worst(np.concatenate([[0.0], vel]))
    return FeasibilityReport(
        dynamics=dyn_res,
        velocity=vel_res,
        start=FamilyResidual(float(start), 0),
        end=FamilyResidual(float(end), traj.n_slots - 1),
        accel=_worst(np.maximum(0.0, accel - uav.a_max)),
        speed_max=_worst(np.maximum(0.0, speed - uav.v_max)),
        speed_min=_worst(np.maximum(0.0, uav.v_min - speed)),
    )
