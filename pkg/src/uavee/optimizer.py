"""The double-loop planner and its two benchmark variants.

Outer loop: successive convex approximation. The surrogates are re-expanded at
the current trajectory (with re-tightened slacks, so the surrogate objective
equals the exact one at the expansion point) until the fractional increase of
the surrogate efficiency falls below `outer_tol`.

Inner loop: Dinkelbach iterations on the fractional surrogate objective. Each
pass solves one convex subproblem at fixed lam, then updates
lam <- numerator / denominator; it stops when the parametric objective
F(lam) is within `inner_tol` of zero (rate-sum units), or on the relative
criterion if selected.

Benchmark modes: `max_throughput` drops the energy denominator (outer SCA
only); `max_ee_nojam` plans against a jammer-free copy of the scenario and is
scored against the true one afterwards.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleTrajectoryError, MonotonicityError, SolverError
from .initpath import Theta, line_init, slack_init
from .ipm import SolverOptions, Solution, solve
from .physics import (
    Trajectory,
    energy_efficiency,
    kinematic_residuals,
    throughput_bits,
    trajectory_energy,
)
from .scenario import DEFAULT_INNER_TOL, DEFAULT_OUTER_TOL, Scenario
from .surrogate import (
    Mode,
    build_subproblem,
    pull_interior,
    surrogate_energy,
    surrogate_rate_sum,
)

__all__ = [
    "AlgoOptions",
    "InnerRecord",
    "OuterRecord",
    "FinalMetrics",
    "RunReport",
    "dinkelbach_inner",
    "optimize",
    "evaluate_final",
]


@dataclass
class AlgoOptions:
    mode: str = Mode.MAX_EE.value
    outer_tol: float = DEFAULT_OUTER_TOL      # fractional objective increase
    inner_tol: float = DEFAULT_INNER_TOL      # |F(lam)|, rate-sum units
    inner_stop: str = "paper"                 # "paper" (absolute) or "relative"
    inner_rel_tol: float = 1e-6
    max_outer: int = 50
    max_inner: int = 30
    paper_eq23: bool = False
    solver: SolverOptions = field(default_factory=SolverOptions)

    @classmethod
    def from_dict(cls, data, **overrides):
        """Options from a scenario file's `solver` block (mu/eta naming accepted)."""
        data = dict(data or {})
        data.update(overrides)
        opts = cls()
        alias = {"mu": "outer_tol", "eta": "inner_tol"}
        for key, value in data.items():
            key = alias.get(key, key)
            if key == "tol":
                opts.solver.tol = float(value)
            elif hasattr(opts, key):
                cur = getattr(opts, key)
                setattr(opts, key, type(cur)(value) if cur is not None else value)
            else:
                raise ValueError(f"unknown solver option {key!r}")
        return opts


@dataclass(frozen=True)
class InnerRecord:
    outer_iter: int
    inner_iter: int
    lam: float                 # bits/joule carried into the solve
    f_lambda: float            # parametric objective, rate-sum units
    f_lambda_bits: float       # same in bits
    surrogate_obj: float       # surrogate efficiency at the new point, bits/joule
    exact_throughput_bits: float
    exact_energy_joules: float
    exact_ee: float
    solver_iters: int
    wall_ms: float


@dataclass(frozen=True)
class OuterRecord:
    outer_iter: int
    objective: float           # surrogate efficiency (bits/J), or bits for max_throughput
    exact_ee: float            # on the scenario being optimized
    inner: tuple


@dataclass(frozen=True)
class FinalMetrics:
    avg_speed_mps: float
    throughput_bits: float
    energy_joules: float
    ee_bits_per_joule: float

    def table_row(self):
        return {
            "avg_speed_mps": round(self.avg_speed_mps, 2),
            "throughput_kbits": round(self.throughput_bits / 1e3, 1),
            "energy_joules": round(self.energy_joules, 1),
            "ee_kbits_per_joule": round(self.ee_bits_per_joule / 1e3, 3),
        }


@dataclass
class RunReport:
    mode: str
    records: list
    theta: Theta
    metrics: FinalMetrics
    termination: str           # outer_converged | max_outer
    init_traj: Trajectory
    last_solution: Solution | None = None

    @property
    def trajectory(self):
        return self.theta.traj

    def lambda_sequence(self):
        return [r.lam for rec in self.records for r in rec.inner]

    def exact_ee_sequence(self):
        return [rec.exact_ee for rec in self.records]

    def convergence_rows(self):
        rows = []
        for rec in self.records:
            for r in rec.inner:
                rows.append(
                    {
                        "outer_iter": r.outer_iter,
                        "inner_iter": r.inner_iter,
                        "lambda": r.lam,
                        "F_lambda": r.f_lambda,
                        "surrogate_obj": r.surrogate_obj,
                        "exact_throughput_bits": r.exact_throughput_bits,
                        "exact_energy_J": r.exact_energy_joules,
                        "exact_EE": r.exact_ee,
                        "solver_iters": r.solver_iters,
                        "wall_ms": round(r.wall_ms, 3),
                    }
                )
        return rows


def _exact_metrics(traj, scn):
    tp = throughput_bits(traj, scn)
    en = trajectory_energy(traj, scn.energy, scn.horizon.dt)
    return tp, en, tp / en


def dinkelbach_inner(theta_f: Theta, scn: Scenario, opts: AlgoOptions, outer_iter=0):
    """Inner parametric loop at a fixed expansion point.

    Returns (theta_new, last_solution, lam_final, records); `scn` must already
    match the expansion point (jammers stripped for the jamming-blind mode).
    """
    mode = Mode(opts.mode)
    dt = scn.horizon.dt
    num = dt * surrogate_rate_sum(theta_f, theta_f, scn.channel.bandwidth)
    den = surrogate_energy(theta_f, theta_f, scn.energy, dt)
    lam = num / den
    warm = None
    records = []
    theta_new = theta_f
    sol = None
    for j in range(opts.max_inner):
        t0 = time.perf_counter()
        prog = build_subproblem(theta_f, lam, scn, mode, paper_eq23=opts.paper_eq23)
        if warm is None:
            pulled = pull_interior(theta_f, scn)
            warm = prog.layout.pack(pulled.traj, pulled.slacks)
        sol = solve(prog, warm_start=warm, opts=opts.solver)
        if sol.status != "optimal":
            raise SolverError(
                f"subproblem solve failed at outer {outer_iter} inner {j}: "
                f"status={sol.status}, residuals={sol.residuals}"
            )
        theta_new = prog.layout.unpack(sol.x)
        num = dt * surrogate_rate_sum(theta_new, theta_f, scn.channel.bandwidth)
        den = surrogate_energy(theta_new, theta_f, scn.energy, dt)
        f_bits = num - lam * den
        lam_new = num / den
        tp, en, ee = _exact_metrics(theta_new.traj, scn)
        records.append(
            InnerRecord(
                outer_iter=outer_iter,
                inner_iter=j,
                lam=lam,
                f_lambda=f_bits / dt,
                f_lambda_bits=f_bits,
                surrogate_obj=lam_new,
                exact_throughput_bits=tp,
                exact_energy_joules=en,
                exact_ee=ee,
                solver_iters=sol.iterations,
                wall_ms=(time.perf_counter() - t0) * 1e3,
            )
        )
        if lam_new < lam * (1.0 - 1e-6):
            raise MonotonicityError(
                f"lambda decreased from {lam:.9g} to {lam_new:.9g} at outer "
                f"{outer_iter} inner {j}"
            )
        if opts.inner_stop == "relative":
            done = abs(f_bits) <= opts.inner_rel_tol * max(num, 1.0)
        else:
            done = abs(f_bits / dt) <= opts.inner_tol
        lam = lam_new
        warm = sol.x
        if done:
            break
    return theta_new, sol, lam, records


def optimize(scn: Scenario, init: Trajectory | None = None, opts: AlgoOptions | None = None):
    """Run the planner (or a benchmark mode) and return a full RunReport."""
    opts = opts or AlgoOptions()
    mode = Mode(opts.mode)
    work_scn = scn.without_jammers() if mode is Mode.MAX_EE_NOJAM else scn
    dt = scn.horizon.dt

    init_traj = init if init is not None else line_init(scn)
    rep = kinematic_residuals(init_traj, scn.uav, scn.horizon)
    if rep.max_residual() > 1e-6:
        raise InfeasibleTrajectoryError(
            f"initial trajectory infeasible: worst residual {rep.max_residual():.3g}"
        )

    theta = Theta(init_traj, slack_init(init_traj, work_scn))
    records = []
    obj_prev = None
    exact_prev = None
    termination = "max_outer"
    last_sol = None

    for k in range(opts.max_outer):
        if mode is Mode.MAX_THROUGHPUT:
            t0 = time.perf_counter()
            prog = build_subproblem(theta, 0.0, work_scn, mode, paper_eq23=opts.paper_eq23)
            pulled = pull_interior(theta, work_scn)
            warm = prog.layout.pack(pulled.traj, pulled.slacks)
            sol = solve(prog, warm_start=warm, opts=opts.solver)
            if sol.status != "optimal":
                raise SolverError(
                    f"subproblem solve failed at outer {k}: status={sol.status}, "
                    f"residuals={sol.residuals}"
                )
            theta_new = prog.layout.unpack(sol.x)
            obj = dt * surrogate_rate_sum(theta_new, theta, work_scn.channel.bandwidth)
            tp, en, ee = _exact_metrics(theta_new.traj, work_scn)
            inner = (
                InnerRecord(
                    outer_iter=k,
                    inner_iter=0,
                    lam=0.0,
                    f_lambda=obj / dt,
                    f_lambda_bits=obj,
                    surrogate_obj=obj,
                    exact_throughput_bits=tp,
                    exact_energy_joules=en,
                    exact_ee=ee,
                    solver_iters=sol.iterations,
                    wall_ms=(time.perf_counter() - t0) * 1e3,
                ),
            )
            monotone_measure = tp
        else:
            theta_new, sol, lam, inner_list = dinkelbach_inner(theta, work_scn, opts, outer_iter=k)
            inner = tuple(inner_list)
            obj = lam
            _, _, ee = _exact_metrics(theta_new.traj, work_scn)
            monotone_measure = ee
        last_sol = sol

        if exact_prev is not None and monotone_measure < exact_prev * (1.0 - 1e-6) - 1e-12:
            raise MonotonicityError(
                f"exact objective decreased from {exact_prev:.9g} to "
                f"{monotone_measure:.9g} at outer iteration {k}"
            )
        exact_prev = monotone_measure

        records.append(
            OuterRecord(
                outer_iter=k,
                objective=obj,
                exact_ee=_exact_metrics(theta_new.traj, work_scn)[2],
                inner=inner,
            )
        )

        # re-expand at the new trajectory with re-tightened slacks, so the next
        # surrogate is exact at its own expansion point
        theta = Theta(theta_new.traj, slack_init(theta_new.traj, work_scn))

        if obj_prev is not None and (obj - obj_prev) < opts.outer_tol * abs(obj_prev):
            termination = "outer_converged"
            break
        obj_prev = obj

    final_rep = kinematic_residuals(theta.traj, scn.uav, scn.horizon)
    if final_rep.max_residual() > 1e-6:
        raise SolverError(
            f"final trajectory violates mobility constraints: worst residual "
            f"{final_rep.max_residual():.3g}"
        )

    return RunReport(
        mode=mode.value,
        records=records,
        theta=theta,
        metrics=evaluate_final_traj(theta.traj, scn),
        termination=termination,
        init_traj=init_traj,
        last_solution=last_sol,
    )


def evaluate_final_traj(traj: Trajectory, scn: Scenario) -> FinalMetrics:
    tp, en, ee = _exact_metrics(traj, scn)
    return FinalMetrics(
        avg_speed_mps=float(traj.speeds().mean()),
        throughput_bits=tp,
        energy_joules=en,
        ee_bits_per_joule=ee,
    )


def evaluate_final(report: RunReport, scn: Scenario) -> FinalMetrics:
    """Score a run's final trajectory against the (true) scenario."""
    return evaluate_final_traj(report.trajectory, scn)
