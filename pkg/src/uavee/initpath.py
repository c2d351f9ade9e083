"""Construction of a strictly feasible starting point for the planner.

The endpoint pair either admits a constant-velocity straight line (average
speed >= v_min), or the path is stretched into a constant-speed circular-arc
detour whose length equals speed * T. The arc turn rate is solved so the
chord closes exactly; a uniform velocity offset absorbs the residual, which
leaves the per-slot accelerations untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import InfeasibleTrajectoryError
from .physics import Trajectory, channel_gain, kinematic_residuals
from .scenario import Scenario

__all__ = ["SlackSet", "Theta", "line_init", "slack_init"]


@dataclass(frozen=True)
class SlackSet:
    """Auxiliary variables of the convex reformulation.

    tau: per-slot speed lower-estimate (m/s), shape (N,)
    L:   reciprocal received source power (1/W), shape (N,)
    I:   interference-plus-noise power (W), shape (N,)
    d:   squared 3-D distance to each jammer (m^2), shape (M, N)
    """

    tau: np.ndarray
    L: np.ndarray
    I: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        for name in ("tau", "L", "I", "d"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = self.tau.shape[0]
        if self.L.shape != (n,) or self.I.shape != (n,) or self.d.ndim != 2 or self.d.shape[1] != n:
            raise ValueError("slack arrays have inconsistent shapes")

    @property
    def n_jammers(self):
        return self.d.shape[0]


@dataclass(frozen=True)
class Theta:
    """One feasible point of the reformulated problem: trajectory plus slacks."""

    traj: Trajectory
    slacks: SlackSet


def _arc_sum(theta, n):
    """Complex chord factor of an n-slot constant-speed arc with turn rate theta."""
    steps = np.exp(1j * theta * np.arange(1, n + 1))
    return steps.sum() + 0.5 * (steps[-1] - steps[0])


def _build_from_velocities(start, v, dt):
    """Positions from the velocity sequence; first-slot acceleration is zero."""
    a = np.zeros_like(v)
    a[1:] = (v[1:] - v[:-1]) / dt
    q = np.empty_like(v)
    q[0] = start + v[0] * dt + 0.5 * a[0] * dt**2
    for k in range(1, len(v)):
        q[k] = q[k - 1] + v[k] * dt + 0.5 * a[k] * dt**2
    return Trajectory(q, v, a)


def _arc_init(scn: Scenario, speed, detour_toward):
    n = scn.horizon.n_slots
    dt = scn.horizon.dt
    start = scn.uav.start_xy
    delta = scn.uav.end_xy - start
    dist = float(np.linalg.norm(delta))

    theta_hi = 2.0 * np.pi / n

    def chord_gap(theta):
        return speed * dt * abs(_arc_sum(theta, n)) - dist

    if chord_gap(theta_hi) >= 0.0:
        theta = theta_hi  # endpoints (almost) coincide: full loop
    else:
        theta = brentq(chord_gap, 1e-12, theta_hi, xtol=1e-15, rtol=8.9e-16)

    def build(theta_signed, phi0):
        head = phi0 + theta_signed * np.arange(1, n + 1)
        v = speed * np.stack([np.cos(head), np.sin(head)], axis=1)
        traj = _build_from_velocities(start, v, dt)
        # uniform velocity offset closes the endpoint exactly without touching a
        shift = (scn.uav.end_xy - traj.q[-1]) / (n * dt)
        return _build_from_velocities(start, v + shift, dt), np.linalg.norm(shift)

    if dist > 0.0:
        phi0 = np.arctan2(delta[1], delta[0]) - np.angle(_arc_sum(theta, n))
        cand_a, shift_a = build(theta, phi0)
        phi0_m = np.arctan2(delta[1], delta[0]) + np.angle(_arc_sum(theta, n))
        cand_b, shift_b = build(-theta, phi0_m)
    else:
        cand_a, shift_a = build(theta, 0.0)
        # rotate the loop so its far side points at the reference direction
        mid = cand_a.q[n // 2] - start
        rot = np.arctan2(detour_toward[1], detour_toward[0]) - np.arctan2(mid[1], mid[0])
        c, s = np.cos(rot), np.sin(rot)
        v_rot = cand_a.v @ np.array([[c, s], [-s, c]])
        cand_a = _build_from_velocities(start, v_rot, dt)
        cand_b, shift_b = cand_a, shift_a

    def side_score(traj):
        mid = traj.q[n // 2] - start
        return float(np.dot(mid, detour_toward))

    traj, shift = (cand_a, shift_a) if side_score(cand_a) >= side_score(cand_b) else (cand_b, shift_b)

    turn_accel = 2.0 * speed * abs(np.sin(theta / 2.0)) / dt
    if turn_accel + shift / (n * dt) > scn.uav.a_max:
        raise InfeasibleTrajectoryError(
            f"detour needs turn acceleration {turn_accel:.3g} m/s^2 > a_max="
            f"{scn.uav.a_max:.3g} (horizon too short for a loitering path)"
        )
    return traj


def line_init(scn: Scenario, detour_toward=None) -> Trajectory:
    """A feasible trajectory: straight line, or a constant-speed arc detour.

    `detour_toward` picks the half-plane the detour bulges into; by default it
    leans toward the source node (falling back to +y when the source sits on
    the start-end axis).
    """
    n = scn.horizon.n_slots
    dt = scn.horizon.dt
    start = scn.uav.start_xy
    delta = scn.uav.end_xy - start
    dist = float(np.linalg.norm(delta))
    direct_speed = dist / (n * dt)

    if direct_speed > scn.uav.v_max * (1.0 + 1e-12):
        raise InfeasibleTrajectoryError(
            f"endpoints need average speed {direct_speed:.6g} m/s > v_max={scn.uav.v_max:.6g}"
        )

    if direct_speed >= scn.uav.v_min:
        v_bar = delta / (n * dt)
        v = np.tile(v_bar, (n, 1))
        q = start + np.outer(np.arange(1, n + 1) * dt, v_bar)
        return Trajectory(q, v, np.zeros_like(v))

    if detour_toward is None:
        ref = scn.source.xy - start
        chord = delta / dist if dist > 0.0 else np.array([1.0, 0.0])
        off_axis = abs(float(np.cross(chord, ref))) > 1e-9 * max(1.0, np.linalg.norm(ref))
        detour_toward = ref if off_axis and np.linalg.norm(ref) > 0.0 else np.array([0.0, 1.0])
    detour_toward = np.asarray(detour_toward, dtype=float)

    speed = min(1.1 * scn.uav.v_min, 0.5 * (scn.uav.v_min + scn.uav.v_max))
    traj = _arc_init(scn, speed, detour_toward)

    report = kinematic_residuals(traj, scn.uav, scn.horizon)
    if report.max_residual() > 1e-9:
        raise InfeasibleTrajectoryError(
            f"arc construction failed feasibility: worst residual "
            f"{report.max_residual():.3g} (family values {report.families()!r})"
        )
    return traj


def slack_init(traj: Trajectory, scn: Scenario) -> SlackSet:
    """Slack values that make every reformulation constraint tight at `traj`."""
    ch = scn.channel
    g_su = channel_gain(traj.q, scn.uav.altitude, scn.source, ch.beta0)
    big_l = 1.0 / (ch.source_power * g_su)

    m = scn.n_jammers
    n = traj.n_slots
    d = np.zeros((m, n))
    interference = np.zeros(n)
    for k, jam in enumerate(scn.jammers):
        d[k] = np.sum((traj.q - jam.node.xy) ** 2, axis=1) + scn.uav.altitude**2
        interference += jam.power * ch.beta0 / d[k]

    return SlackSet(
        tau=traj.speeds(),
        L=big_l,
        I=interference + ch.noise_power,
        d=d,
    )
