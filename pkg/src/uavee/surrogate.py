"""Convex surrogate construction: tangent bounds and subproblem assembly.

Given a feasible expansion point, every non-convex piece of the planning
problem is replaced by a bound that is tight at that point:

  * the rate written over slack variables (L, I) is lower-bounded by its
    tangent plane (the rate curve is convex in (L, I)),
  * squared speed is lower-bounded by its tangent (for the minimum-speed and
    speed-slack couplings),
  * squared jammer distance is lower-bounded by its tangent (the altitude
    term is a constant and is kept; a compatibility flag drops it).

`build_subproblem` assembles one full parametric program: maximize
dt*sum(rate bound) - lam * (energy over slacks), in minimization form.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .initpath import SlackSet, Theta
from .program import ProgramBuilder, VariableLayout
from .scenario import Scenario

__all__ = [
    "Mode",
    "D_FLOOR",
    "RateBound",
    "AffineBound",
    "rate_bound_coeffs",
    "speed_sq_bound",
    "dist_sq_bound",
    "build_subproblem",
    "surrogate_rate_sum",
    "surrogate_energy",
    "pull_interior",
]

LOG2E = math.log2(math.e)

# floor on the jammer-distance slack so its reciprocal stays smooth
D_FLOOR = 1e-6  # m^2


class Mode(str, enum.Enum):
    MAX_EE = "max_ee"
    MAX_THROUGHPUT = "max_throughput"
    MAX_EE_NOJAM = "max_ee_nojam"


@dataclass(frozen=True)
class RateBound:
    """Tangent-plane lower bound of B*log2(1 + 1/(L*I)) at (ref_L, ref_I)."""

    constant: float   # bound value at the expansion point, bit/s
    coef_L: float     # slope over L; negative for positive inputs
    coef_I: float     # slope over I; negative for positive inputs
    ref_L: float
    ref_I: float

    def value(self, L, I):
        return self.constant + self.coef_L * (L - self.ref_L) + self.coef_I * (I - self.ref_I)


@dataclass(frozen=True)
class AffineBound:
    """Affine under-estimator value(p) = constant + grad @ p."""

    constant: float
    grad: np.ndarray

    def value(self, point):
        return self.constant + float(self.grad @ np.asarray(point, dtype=float))


def _rate_bound_arrays(l_f, i_f, bandwidth):
    prod = l_f * i_f
    const = bandwidth * np.log2(1.0 + 1.0 / prod)
    coef_l = -bandwidth * LOG2E / (l_f + l_f**2 * i_f)
    coef_i = -bandwidth * LOG2E / (i_f + i_f**2 * l_f)
    return const, coef_l, coef_i


def rate_bound_coeffs(l_f, i_f, bandwidth) -> RateBound:
    if l_f <= 0.0 or i_f <= 0.0:
        raise ValueError(f"expansion point must be positive, got L={l_f!r}, I={i_f!r}")
    const, coef_l, coef_i = _rate_bound_arrays(float(l_f), float(i_f), bandwidth)
    return RateBound(float(const), float(coef_l), float(coef_i), float(l_f), float(i_f))


def speed_sq_bound(v_f) -> AffineBound:
    """Tangent of ||v||^2 at v_f: 2 v_f @ v - ||v_f||^2."""
    v_f = np.asarray(v_f, dtype=float)
    return AffineBound(constant=-float(v_f @ v_f), grad=2.0 * v_f)


def dist_sq_bound(q_f, jammer_xy, altitude, include_altitude=True) -> AffineBound:
    """Tangent of the squared 3-D distance to a jammer at horizontal point q_f.

    The altitude contributes the constant altitude^2; `include_altitude=False`
    reproduces the purely horizontal variant for comparison runs.
    """
    q_f = np.asarray(q_f, dtype=float)
    jxy = np.asarray(jammer_xy, dtype=float)
    grad = 2.0 * (q_f - jxy)
    const = float((q_f - jxy) @ (q_f - jxy)) - float(grad @ q_f)
    if include_altitude:
        const += altitude**2
    return AffineBound(constant=const, grad=grad)


def pull_interior(theta: Theta, scn: Scenario, rel=1e-6) -> Theta:
    """Nudge slack variables strictly inside their constraints (trajectory kept)."""
    sl = theta.slacks
    tau = np.maximum(scn.uav.v_min, sl.tau * (1.0 - rel))
    d = np.maximum(sl.d * (1.0 - rel), D_FLOOR * (1.0 + rel))
    if sl.n_jammers:
        beta0 = scn.channel.beta0
        powers = scn.jammer_powers()
        required = (powers[:, None] * beta0 / d).sum(axis=0) + scn.channel.noise_power
    else:
        required = np.full_like(sl.I, scn.channel.noise_power)
    big_i = np.maximum(sl.I, required) * (1.0 + rel)
    return Theta(theta.traj, SlackSet(tau=tau, L=sl.L * (1.0 + rel), I=big_i, d=d))


def surrogate_rate_sum(theta: Theta, theta_f: Theta, bandwidth):
    """Sum over slots of the tangent rate bound, in bit/s (no dt factor)."""
    const, coef_l, coef_i = _rate_bound_arrays(theta_f.slacks.L, theta_f.slacks.I, bandwidth)
    return float(
        np.sum(
            const
            + coef_l * (theta.slacks.L - theta_f.slacks.L)
            + coef_i * (theta.slacks.I - theta_f.slacks.I)
        )
    )


def surrogate_energy(theta: Theta, theta_f: Theta, energy, dt):
    """Energy model over the slack speed tau, in joules.

    For nonzero mass the decreasing half of the kinetic-energy change is
    replaced by its tangent at the expansion point, which over-estimates the
    true energy and preserves the lower-bound structure of the surrogate
    objective.
    """
    v = theta.traj.v
    a2 = np.sum(theta.traj.a**2, axis=1)
    cruise = energy.c1 * np.sum(theta.traj.speeds() ** 3)
    induced = np.sum((energy.c2 / theta.slacks.tau) * (1.0 + a2 / energy.gravity**2))
    total = dt * (cruise + induced)
    if energy.mass != 0.0:
        bound0 = speed_sq_bound(theta_f.traj.v[0])
        total += 0.5 * energy.mass * (float(v[-1] @ v[-1]) - bound0.value(v[0]))
    return float(total)


def _geometry_scale(scn: Scenario, traj):
    pts = [np.abs(scn.uav.start_xy).max(), np.abs(scn.uav.end_xy).max(),
           np.abs(scn.source.xy).max(), np.abs(traj.q).max(), scn.uav.altitude]
    if scn.n_jammers:
        pts.append(np.abs(scn.jammer_xy()).max())
    return max(100.0, float(max(pts)))


def build_subproblem(theta_f: Theta, lam, scn: Scenario, mode, paper_eq23=False):
    """Assemble one parametric subproblem at expansion point `theta_f`.

    Returns the program in minimization form: the reported objective is
    lam * energy_surrogate - dt * rate_bound_sum (bits). `mode` selects the
    planner variant: the throughput maximizer drops the energy term and the
    speed-slack machinery; the jamming-blind variant expects a scenario and
    expansion point without jammers.
    """
    mode = Mode(mode)
    if mode is Mode.MAX_EE_NOJAM:
        scn = scn.without_jammers()
    if lam < 0.0:
        raise ValueError(f"lam must be nonnegative, got {lam!r}")
    m = scn.n_jammers
    if theta_f.slacks.n_jammers != m:
        raise ValueError(
            f"expansion point has {theta_f.slacks.n_jammers} jammer slacks, "
            f"scenario has {m}"
        )
    n = scn.horizon.n_slots
    if theta_f.traj.n_slots != n:
        raise ValueError("expansion point horizon mismatch")
    dt = scn.horizon.dt
    ch, en, uav = scn.channel, scn.energy, scn.uav
    sl = theta_f.slacks
    if np.any(sl.tau < uav.v_min * (1.0 - 1e-9)) or np.any(sl.L <= 0) or np.any(sl.I <= 0):
        raise ValueError("expansion point slacks are infeasible")

    with_tau = mode is not Mode.MAX_THROUGHPUT
    layout = VariableLayout(n_slots=n, n_jammers=m, with_tau=with_tau)
    b = ProgramBuilder(layout.n_vars, layout)

    q_ix, v_ix, a_ix = layout.q, layout.v, layout.a

    # variable scales: geometry for q, bounds for v/a, expansion values for slacks
    b.var_scale[q_ix] = _geometry_scale(scn, theta_f.traj)
    b.var_scale[v_ix] = uav.v_max
    b.var_scale[a_ix] = uav.a_max
    if with_tau:
        b.var_scale[layout.tau] = sl.tau
    b.var_scale[layout.L] = sl.L
    b.var_scale[layout.I] = sl.I
    if m:
        b.var_scale[layout.d] = sl.d

    # --- kinematic equalities -------------------------------------------------
    start, end = uav.start_xy, uav.end_xy
    half_dt2 = 0.5 * dt * dt
    for c in range(2):
        b.add_eq([q_ix[0, c], v_ix[0, c], a_ix[0, c]], [1.0, -dt, -half_dt2], start[c])
        b.add_eq([q_ix[n - 1, c]], [1.0], end[c])
    for i in range(1, n):
        for c in range(2):
            b.add_eq(
                [q_ix[i, c], q_ix[i - 1, c], v_ix[i, c], a_ix[i, c]],
                [1.0, -1.0, -dt, -half_dt2],
                0.0,
            )
            b.add_eq([v_ix[i, c], v_ix[i - 1, c], a_ix[i, c]], [1.0, -1.0, -dt], 0.0)

    # --- objective --------------------------------------------------------------
    const_arr, coef_l, coef_i = _rate_bound_arrays(sl.L, sl.I, ch.bandwidth)
    b.add_linear_objective(layout.L, -dt * coef_l)
    b.add_linear_objective(layout.I, -dt * coef_i)
    b.add_const_objective(-dt * float(np.sum(const_arr - coef_l * sl.L - coef_i * sl.I)))

    if mode is not Mode.MAX_THROUGHPUT:
        for i in range(n):
            b.add_cube(v_ix[i], lam * dt * en.c1)
            b.add_qol(a_ix[i], layout.tau[i], en.gravity**2, 1.0, lam * dt * en.c2)
        if en.mass != 0.0:
            b.add_quad(v_ix[n - 1], (0.0, 0.0), 0.0, lam * 0.5 * en.mass)
            tangent = speed_sq_bound(theta_f.traj.v[0])
            b.add_linear_objective(v_ix[0], -lam * 0.5 * en.mass * tangent.grad)
            b.add_const_objective(-lam * 0.5 * en.mass * tangent.constant)

    # --- per-slot inequality constraints ---------------------------------------
    src = scn.source.xy
    jam_xy = scn.jammer_xy()
    powers = scn.jammer_powers()
    for i in range(n):
        row = b.add_ineq()
        b.add_quad(a_ix[i], (0.0, 0.0), -uav.a_max**2, 1.0, target=row)
        row = b.add_ineq()
        b.add_quad(v_ix[i], (0.0, 0.0), -uav.v_max**2, 1.0, target=row)

        spb = speed_sq_bound(theta_f.traj.v[i])
        b.add_ineq(v_ix[i], -spb.grad, uav.v_min**2 - spb.constant)

        if with_tau:
            b.add_ineq([layout.tau[i]], [-1.0], uav.v_min)
            row = b.add_ineq(v_ix[i], -spb.grad, -spb.constant)
            b.add_quad([layout.tau[i]], (0.0,), 0.0, 1.0, target=row)

        row = b.add_ineq([layout.L[i]], [-ch.source_power * ch.beta0], 0.0)
        b.add_quad(q_ix[i], src, uav.altitude**2, 1.0, target=row)

        row = b.add_ineq([layout.I[i]], [-1.0], ch.noise_power)
        for k in range(m):
            b.add_recip(layout.d[k, i], powers[k] * ch.beta0, target=row)

        for k in range(m):
            b.add_ineq([layout.d[k, i]], [-1.0], D_FLOOR)
            qb = dist_sq_bound(
                theta_f.traj.q[i], jam_xy[k], uav.altitude, include_altitude=not paper_eq23
            )
            b.add_ineq(
                [layout.d[k, i], q_ix[i, 0], q_ix[i, 1]],
                [1.0, -qb.grad[0], -qb.grad[1]],
                -qb.constant,
            )

    return b.build(
        meta={
            "mode": mode.value,
            "lam": float(lam),
            "dt": dt,
            "paper_eq23": bool(paper_eq23),
        }
    )
