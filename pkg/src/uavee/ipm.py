"""Primal-dual interior-point solver for the structured convex programs.

Mehrotra-style predictor-corrector with explicit inequality slacks. The
condensed KKT system inherits the time-banded sparsity of the kinematic
coupling: after a reverse-Cuthill-McKee ordering its bandwidth is independent
of the horizon length, and each Newton step factorizes a banded LU (LAPACK
gbtrf/gbtrs). A dense factorization sits behind the same interface for
differential testing and for small or unstructured programs.

All internal iterations run on a scaled copy of the program (per-variable
column scales from the warm start, gradient-based row scales, and a global
objective scale), so the KKT tolerance is a scaled quantity.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import get_lapack_funcs, lu_factor, lu_solve
from scipy.sparse.csgraph import reverse_cuthill_mckee

from . import kernels
from .program import ConvexProgram, scale_program

__all__ = ["SolverOptions", "Scaling", "KktResiduals", "Solution", "solve", "kkt_residuals"]

_gbtrf, _gbtrs = get_lapack_funcs(("gbtrf", "gbtrs"), (np.array([[1.0]]),))


@dataclass
class SolverOptions:
    tol: float = 1e-8              # scaled KKT tolerance
    max_iter: int = 200
    sigma_power: float = 3.0       # Mehrotra centering exponent
    sigma_min: float = 1e-8
    sigma_max: float = 0.99
    ftb: float = 0.99              # fraction-to-boundary factor
    ls_shrink: float = 0.5         # backtracking constants on the residual merit
    ls_decrease: float = 0.01
    ls_t_min: float = 1e-4
    init_mu: float = 0.1
    slack_floor: float = 0.1
    reg_init: float = 1e-9         # static KKT regularization, escalated x10 on failure
    reg_max: float = 1e-3
    factorization: str = "auto"    # auto | banded | dense
    trace_path: str | None = None


@dataclass(frozen=True)
class Scaling:
    """Diagonal scaling the solver operated under (see module docstring)."""

    col: np.ndarray
    row_eq: np.ndarray
    row_in: np.ndarray
    obj: float


@dataclass(frozen=True)
class KktResiduals:
    stationarity: float
    primal_eq: float
    primal_ineq: float
    dual: float
    complementarity: float

    def max(self):
        return max(
            self.stationarity,
            self.primal_eq,
            self.primal_ineq,
            self.dual,
            self.complementarity,
        )


@dataclass
class Solution:
    x: np.ndarray
    nu: np.ndarray            # equality multipliers, natural units
    z: np.ndarray             # inequality multipliers, natural units (>= 0)
    objective: float
    residuals: KktResiduals   # scaled norms certified by the solver
    iterations: int
    status: str               # optimal | max_iter | numerical_failure
    scaling: Scaling
    mu: float
    merit_steps: list = field(default_factory=list)  # (before, after) per iteration
    used_banded: bool = False


def kkt_residuals(program: ConvexProgram, x, nu=None, z=None, scaling: Scaling | None = None):
    """KKT residual norms of (x, nu, z) for `program`.

    Natural units by default; pass a Solution's `scaling` to reproduce the
    scaled view the solver certified.
    """
    x = np.asarray(x, dtype=float)
    nu = np.zeros(program.n_eq) if nu is None else np.asarray(nu, dtype=float)
    z = np.zeros(program.n_ineq) if z is None else np.asarray(z, dtype=float)
    if scaling is not None:
        program = scale_program(program, scaling.col, scaling.row_eq, scaling.row_in, scaling.obj)
        x = x / scaling.col
        nu = scaling.row_eq * nu / scaling.obj
        z = scaling.row_in * z / scaling.obj

    _, gf = program.objective_grad(x)
    r_d = gf
    if program.n_eq:
        r_d = r_d + program.a_eq.T @ nu
    if program.n_ineq:
        r_d = r_d + program.constraint_jacobian(x).T @ z
        g = program.constraint_values(x)
        primal_ineq = float(max(0.0, g.max()))
        dual = float(max(0.0, -z.min())) if z.size else 0.0
        comp = float(np.abs(z * g).max())
    else:
        primal_ineq = dual = comp = 0.0
    primal_eq = float(np.abs(program.a_eq @ x - program.b_eq).max()) if program.n_eq else 0.0
    return KktResiduals(
        stationarity=float(np.abs(r_d).max()) if r_d.size else 0.0,
        primal_eq=primal_eq,
        primal_ineq=primal_ineq,
        dual=dual,
        complementarity=comp,
    )


# ---------------------------------------------------------------------------
# compilation: fixed sparsity structures for one program
# ---------------------------------------------------------------------------


class _Compiled:
    def __init__(self, prog: ConvexProgram, opts: SolverOptions):
        self.prog = prog
        n, me, mi = prog.n_vars, prog.n_eq, prog.n_ineq
        self.n, self.me, self.mi = n, me, mi
        t = prog.terms

        self.obj_mask = t.target < 0
        con_mask = ~self.obj_mask
        # scatter map for the objective gradient
        ot, oa = np.nonzero(self.obj_mask[:, None] & (t.idx >= 0))
        self.obj_t, self.obj_a = ot, oa
        self.obj_cols = t.idx[ot, oa]
        # per-constraint nonlinear values
        self.con_terms = np.flatnonzero(con_mask)
        self.con_targets = t.target[self.con_terms]

        # --- inequality Jacobian pattern: linear entries first, then term slots
        gcoo = prog.g_lin.tocoo()
        ct, ca = np.nonzero(con_mask[:, None] & (t.idx >= 0))
        j_rows = np.concatenate([gcoo.row, t.target[ct]]).astype(np.int64)
        j_cols = np.concatenate([gcoo.col, t.idx[ct, ca]]).astype(np.int64)
        n_lin = gcoo.nnz
        nnz = j_rows.size
        ones = sp.csr_matrix((np.ones(nnz), (j_rows, j_cols)), shape=(mi, n))
        if ones.nnz != nnz:
            raise ValueError("constraint row has overlapping linear/term entries")
        order = sp.csr_matrix(
            (np.arange(nnz, dtype=np.int64) + 1, (j_rows, j_cols)), shape=(mi, n)
        )
        order.sort_indices()
        pos_of = np.empty(nnz, dtype=np.int64)
        pos_of[order.data - 1] = np.arange(nnz)
        self.J = sp.csr_matrix((np.zeros(nnz), order.indices, order.indptr), shape=(mi, n))
        self.j_lin_pos = pos_of[:n_lin]
        self.j_lin_val = gcoo.data.copy()
        self.j_term_pos = pos_of[n_lin:]
        self.j_term_t, self.j_term_a = ct, ca

        jt_order = sp.csr_matrix(
            (np.arange(nnz, dtype=np.int64) + 1, (j_rows, j_cols)), shape=(mi, n)
        ).T.tocsr()
        self.jt_map = (jt_order.data - 1).astype(np.int64)
        self.jt_map_pos = pos_of[self.jt_map]
        self.JT = sp.csr_matrix(
            (np.zeros(nnz), jt_order.indices, jt_order.indptr), shape=(n, mi)
        )

        self.A = prog.a_eq
        self.AT = prog.a_eq.T.tocsr()

        # --- KKT entry catalog -------------------------------------------------
        nk = n + me
        self.nk = nk
        acoo = prog.a_eq.tocoo()
        const_i = np.concatenate([acoo.row + n, acoo.col]).astype(np.int64)
        const_j = np.concatenate([acoo.col, acoo.row + n]).astype(np.int64)
        self.const_val = np.concatenate([acoo.data, acoo.data])

        # Hessian slots: lower triangle pairs per term, mirrored off-diagonal
        hs_i, hs_j, hs_src, hs_w = [], [], [], []
        slot_pairs = ((0, 0), (1, 0), (1, 1), (2, 0), (2, 1), (2, 2))
        wsrc_all = np.where(t.target < 0, 0, t.target + 1).astype(np.int64)
        for s, (a, b) in enumerate(slot_pairs):
            ok = (t.idx[:, a] >= 0) & (t.idx[:, b] >= 0)
            tt = np.flatnonzero(ok)
            ii, jj = t.idx[tt, a], t.idx[tt, b]
            src = tt * 6 + s
            hs_i.append(ii)
            hs_j.append(jj)
            hs_src.append(src)
            hs_w.append(wsrc_all[tt])
            if a != b:
                hs_i.append(jj)
                hs_j.append(ii)
                hs_src.append(src)
                hs_w.append(wsrc_all[tt])
        self.hess_i = np.concatenate(hs_i).astype(np.int64) if hs_i else np.zeros(0, np.int64)
        self.hess_j = np.concatenate(hs_j).astype(np.int64) if hs_j else np.zeros(0, np.int64)
        self.hess_src = np.concatenate(hs_src).astype(np.int64) if hs_src else np.zeros(0, np.int64)
        self.hess_w = np.concatenate(hs_w).astype(np.int64) if hs_w else np.zeros(0, np.int64)

        # J^T diag(z/s) J: all ordered pairs of each constraint row's entries
        row_nnz = np.diff(self.J.indptr)
        pa, pb, prow = [], [], []
        for r in range(mi):
            lo, hi = self.J.indptr[r], self.J.indptr[r + 1]
            ps = np.arange(lo, hi, dtype=np.int64)
            if ps.size:
                a_, b_ = np.meshgrid(ps, ps, indexing="ij")
                pa.append(a_.ravel())
                pb.append(b_.ravel())
                prow.append(np.full(ps.size**2, r, dtype=np.int64))
        self.jdj_pa = np.concatenate(pa) if pa else np.zeros(0, np.int64)
        self.jdj_pb = np.concatenate(pb) if pb else np.zeros(0, np.int64)
        self.jdj_row = np.concatenate(prow) if prow else np.zeros(0, np.int64)
        jdj_i = self.J.indices[self.jdj_pa].astype(np.int64)
        jdj_j = self.J.indices[self.jdj_pb].astype(np.int64)

        diag_i = np.arange(nk, dtype=np.int64)

        all_i = np.concatenate([const_i, self.hess_i, jdj_i, diag_i])
        all_j = np.concatenate([const_j, self.hess_j, jdj_j, diag_i])

        # --- ordering & storage layout ----------------------------------------
        pattern = sp.csr_matrix(
            (np.ones(all_i.size), (all_i, all_j)), shape=(nk, nk)
        )
        if opts.factorization == "dense":
            use_banded = False
        else:
            perm = np.asarray(reverse_cuthill_mckee(pattern, symmetric_mode=True), dtype=np.int64)
            ip = np.empty(nk, dtype=np.int64)
            ip[perm] = np.arange(nk)
            bw = int(np.abs(ip[all_i] - ip[all_j]).max()) if all_i.size else 0
            if opts.factorization == "banded":
                use_banded = True
            else:
                use_banded = nk > 50 and (3 * bw + 1) < 0.75 * nk
        self.use_banded = use_banded

        if use_banded:
            self.perm = perm
            self.bw = bw
            self.ldab = 3 * bw + 1
            pi, pj = ip[all_i], ip[all_j]
            dest = (2 * bw + pi - pj) + pj * self.ldab
            self.flat_size = self.ldab * nk
        else:
            self.perm = np.arange(nk, dtype=np.int64)
            dest = all_i * nk + all_j
            self.flat_size = nk * nk

        nc = const_i.size
        nh = self.hess_i.size
        self.dest_const = dest[:nc]
        self.dest_hess = dest[nc : nc + nh]
        self.dest_jdj = dest[nc + nh : nc + nh + self.jdj_pa.size]
        dest_diag = dest[nc + nh + self.jdj_pa.size :]
        self.dest_diag_x = dest_diag[:n]
        self.dest_diag_nu = dest_diag[n:]

        self.buf = np.zeros(self.flat_size)
        self.dom_idx = np.flatnonzero(np.isfinite(prog.dom_lower))
        self.dom_lo = prog.dom_lower[self.dom_idx]

    # -- per-iterate evaluation (value, gradient, constraints, Jacobian data) --
    def evaluate(self, x):
        t = self.prog.terms
        val, grad, hess = kernels.eval_terms(x, t.kind, t.coeff, t.idx, t.params)
        f = float(self.prog.c_lin @ x + self.prog.c_const + val[self.obj_mask].sum())
        gf = self.prog.c_lin.copy()
        np.add.at(gf, self.obj_cols, grad[self.obj_t, self.obj_a])
        g = self.prog.g_lin @ x + self.prog.h_lin
        if self.con_terms.size:
            g += np.bincount(self.con_targets, weights=val[self.con_terms], minlength=self.mi)
        jdata = np.zeros(self.J.nnz)
        jdata[self.j_lin_pos] = self.j_lin_val
        jdata[self.j_term_pos] = grad[self.j_term_t, self.j_term_a]
        return f, gf, g, jdata, hess

    def assemble(self, hess, z, s, jdata):
        self.buf.fill(0.0)
        kernels.scatter_add(self.buf, self.dest_const, self.const_val)
        if self.dest_hess.size:
            weights = np.concatenate(([1.0], z)) if self.mi else np.ones(1)
            kernels.scatter_hess(
                self.buf, self.dest_hess, self.hess_src, self.hess_w, hess.ravel(), weights
            )
        if self.dest_jdj.size:
            kernels.scatter_jdj(
                self.buf, self.dest_jdj, self.jdj_pa, self.jdj_pb, self.jdj_row, jdata, z / s
            )
        return self.buf

    def factorize(self, base, reg):
        work = base.copy()
        np.add.at(work, self.dest_diag_x, reg)
        np.add.at(work, self.dest_diag_nu, -reg)
        if not np.all(np.isfinite(work)):
            return None
        if self.use_banded:
            ab = work.reshape((self.ldab, self.nk), order="F")
            lu, ipiv, info = _gbtrf(ab, self.bw, self.bw, overwrite_ab=1)
            if info != 0:
                return None
            return ("banded", lu, ipiv)
        mat = work.reshape((self.nk, self.nk))
        try:
            lu, piv = lu_factor(mat, check_finite=False)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(lu)):
            return None
        return ("dense", lu, piv)

    def solve_kkt(self, factor, rhs_x, rhs_nu):
        rhs = np.concatenate([rhs_x, rhs_nu])[self.perm]
        kind, lu, piv = factor
        if kind == "banded":
            sol, info = _gbtrs(lu, self.bw, self.bw, rhs, piv)
            if info != 0:
                return None
        else:
            sol = lu_solve((lu, piv), rhs, check_finite=False)
        out = np.empty(self.nk)
        out[self.perm] = sol
        return out[: self.n], out[self.n :]


def _max_step(vals, deltas, frac):
    if vals.size == 0:
        return 1.0
    neg = deltas < 0
    if not neg.any():
        return 1.0
    return float(min(1.0, frac * np.min(-vals[neg] / deltas[neg])))


def _merit(r_d, r_p, r_g, comp_dev):
    return float(
        np.sqrt(
            np.sum(r_d**2) + np.sum(r_p**2) + np.sum(r_g**2) + np.sum(comp_dev**2)
        )
    )


def solve(program: ConvexProgram, warm_start=None, opts: SolverOptions | None = None) -> Solution:
    """Solve a ConvexProgram to the scaled KKT tolerance in `opts`.

    `warm_start` is a primal point in natural units; it should respect the
    domain floors strictly (feasibility for the inequalities is not required,
    the slack formulation absorbs it).
    """
    opts = opts or SolverOptions()
    n, me, mi = program.n_vars, program.n_eq, program.n_ineq

    # --- scaling from the warm start -----------------------------------------
    col = np.where(program.var_scale > 0, program.var_scale, 1.0)
    if warm_start is not None:
        x0n = np.asarray(warm_start, dtype=float).copy()
    else:
        x0n = np.where(np.isfinite(program.dom_lower), np.maximum(program.dom_lower, 0.0) + 1.0, 0.0)
    p_col = scale_program(program, col)
    x = x0n / col
    dom = np.flatnonzero(np.isfinite(p_col.dom_lower))
    x[dom] = np.maximum(x[dom], p_col.dom_lower[dom] + 1e-10)

    _, gf0 = p_col.objective_grad(x)
    fs = float(np.abs(gf0).max()) if gf0.size and np.abs(gf0).max() > 0 else 1.0
    if me:
        r_eq = np.abs(p_col.a_eq).max(axis=1).toarray().ravel()
        r_eq[r_eq == 0.0] = 1.0
    else:
        r_eq = np.ones(0)
    if mi:
        # row scale from the gradient, guarded by the constraint value so rows
        # whose gradient vanishes at the warm start stay O(1); legitimate
        # gradients can be arbitrarily small here, so no absolute floor
        j0 = np.abs(p_col.constraint_jacobian(x))
        g0 = np.abs(p_col.constraint_values(x))
        r_in = np.maximum(j0.max(axis=1).toarray().ravel(), 0.1 * g0)
        r_in[r_in == 0.0] = 1.0
    else:
        r_in = np.ones(0)
    scaling = Scaling(col=col, row_eq=r_eq, row_in=r_in, obj=fs)
    sprog = scale_program(program, col, r_eq, r_in, fs)

    comp = _Compiled(sprog, opts)

    # --- initial point ---------------------------------------------------------
    _, _, g0, _, _ = comp.evaluate(x)
    s = np.maximum(-g0, opts.slack_floor)
    z = np.clip(opts.init_mu / s, 1e-8, 1e8) if mi else np.zeros(0)
    nu = np.zeros(me)

    status = "max_iter"
    merit_steps = []
    trace_rows = []
    final = None
    reg_base = opts.reg_init
    bad_steps = 0
    it = 0

    for it in range(opts.max_iter):
        f, gf, g, jdata, hess = comp.evaluate(x)
        comp.J.data = jdata
        comp.JT.data = jdata[comp.jt_map_pos]
        r_d = gf + (comp.AT @ nu if me else 0.0) + (comp.JT @ z if mi else 0.0)
        r_p = comp.A @ x - sprog.b_eq if me else np.zeros(0)
        r_g = g + s if mi else np.zeros(0)
        comp_v = s * z
        mu = float(comp_v.mean()) if mi else 0.0

        sd = max(100.0, (np.abs(z).sum() + np.abs(nu).sum()) / max(1, mi + me)) / 100.0
        err_stat = float(np.abs(r_d).max() / sd) if r_d.size else 0.0
        err_eq = float(np.abs(r_p).max()) if me else 0.0
        err_in = float(np.abs(r_g).max()) if mi else 0.0
        err_comp = float(comp_v.max() / sd) if mi else 0.0
        final = KktResiduals(err_stat, err_eq, err_in, 0.0, err_comp)

        if trace_rows is not None and opts.trace_path:
            trace_rows.append(
                {
                    "iteration": it,
                    "mu": mu,
                    "stationarity": err_stat,
                    "primal_eq": err_eq,
                    "primal_ineq": err_in,
                    "complementarity": err_comp,
                }
            )

        if max(err_stat, err_eq, err_in, err_comp) <= opts.tol:
            status = "optimal"
            break

        base = comp.assemble(hess, z, s, jdata)
        factor = None
        reg = reg_base
        while reg <= opts.reg_max:
            factor = comp.factorize(base, reg)
            if factor is not None:
                break
            reg *= 10.0
        if factor is None:
            status = "numerical_failure"
            break

        def direction(rc):
            rhs_x = -r_d - (comp.JT @ ((z * r_g - rc) / s) if mi else 0.0)
            out = comp.solve_kkt(factor, rhs_x, -r_p)
            if out is None:
                return None
            dx, dnu = out
            if mi:
                ds = -r_g - comp.J @ dx
                dz = (-rc - z * ds) / s
            else:
                ds = np.zeros(0)
                dz = np.zeros(0)
            return dx, dnu, ds, dz

        def step_caps(dx, ds, dz, frac):
            a_p = _max_step(s, ds, frac)
            a_p = min(a_p, _max_step(x[comp.dom_idx] - comp.dom_lo, dx[comp.dom_idx], frac))
            return a_p, _max_step(z, dz, frac)

        def trial(dx, dnu, ds, dz, a_p, a_d, t, target):
            x_t = x + t * a_p * dx
            s_t = s + t * a_p * ds
            z_t = z + t * a_d * dz
            nu_t = nu + t * a_d * dnu
            f_t, gf_t, g_t, jdata_t, _ = comp.evaluate(x_t)
            comp.J.data = jdata_t
            comp.JT.data = jdata_t[comp.jt_map_pos]
            r_d_t = gf_t + (comp.AT @ nu_t if me else 0.0) + (comp.JT @ z_t if mi else 0.0)
            r_p_t = comp.A @ x_t - sprog.b_eq if me else np.zeros(0)
            r_g_t = g_t + s_t if mi else np.zeros(0)
            phi_t = _merit(r_d_t, r_p_t, r_g_t, s_t * z_t - target)
            return phi_t, (x_t, s_t, z_t, nu_t)

        if mi:
            # predictor (affine scaling) step for Mehrotra's centering choice
            out = direction(comp_v.copy())
            if out is None:
                status = "numerical_failure"
                break
            dx_a, _, ds_a, dz_a = out
            a_p, a_d = step_caps(dx_a, ds_a, dz_a, 1.0)
            mu_aff = float(((s + a_p * ds_a) * (z + a_d * dz_a)).mean())
            sigma = float(
                np.clip((mu_aff / mu) ** opts.sigma_power, opts.sigma_min, opts.sigma_max)
            )
            rc = comp_v + ds_a * dz_a - sigma * mu
        else:
            sigma = 0.0
            rc = np.zeros(0)

        accepted = False
        phi0 = phi_t = 0.0
        state = None

        # fast path: Mehrotra corrector with split primal/dual step lengths
        out = direction(rc)
        if out is None:
            status = "numerical_failure"
            break
        dx, dnu, ds, dz = out
        a_p, a_d = step_caps(dx, ds, dz, opts.ftb)
        target = sigma * mu
        phi0 = _merit(r_d, r_p, r_g, comp_v - target)
        t_step = 1.0
        for _ in range(3):
            phi_t, state = trial(dx, dnu, ds, dz, a_p, a_d, t_step, target)
            if phi_t <= (1.0 - opts.ls_decrease * t_step * min(a_p, a_d, 1.0)) * phi0:
                accepted = True
                break
            t_step *= opts.ls_shrink

        if not accepted and mi:
            # safe path: damped Newton on the perturbed KKT residuals (no
            # corrector, equal step length) is a descent direction for the merit
            sigma = max(sigma, 0.5)
            target = sigma * mu
            out = direction(comp_v - target)
            if out is None:
                status = "numerical_failure"
                break
            dx, dnu, ds, dz = out
            a_p, a_d = step_caps(dx, ds, dz, opts.ftb)
            a_p = a_d = min(a_p, a_d)
            phi0 = _merit(r_d, r_p, r_g, comp_v - target)
            t_step = 1.0
            while t_step >= opts.ls_t_min:
                phi_t, state = trial(dx, dnu, ds, dz, a_p, a_d, t_step, target)
                if phi_t <= (1.0 - opts.ls_decrease * t_step * a_p) * phi0:
                    accepted = True
                    break
                t_step *= opts.ls_shrink

        merit_steps.append((phi0, phi_t))
        if not accepted:
            bad_steps += 1
            if bad_steps >= 3:
                status = "numerical_failure"
                it += 1
                break
        else:
            bad_steps = 0
        x, s, z, nu = state

    if opts.trace_path:
        with open(opts.trace_path, "w", newline="") as fh:
            writer = csv.DictWriter(
                fh,
                fieldnames=[
                    "iteration",
                    "mu",
                    "stationarity",
                    "primal_eq",
                    "primal_ineq",
                    "complementarity",
                ],
            )
            writer.writeheader()
            writer.writerows(trace_rows)

    x_nat = x * col
    nu_nat = fs * nu / r_eq if me else nu
    z_nat = fs * z / r_in if mi else z
    return Solution(
        x=x_nat,
        nu=nu_nat,
        z=z_nat,
        objective=program.objective_value(x_nat),
        residuals=final,
        iterations=it + (1 if status != "optimal" else 0),
        status=status,
        scaling=scaling,
        mu=float((s * z).mean()) if mi else 0.0,
        merit_steps=merit_steps,
        used_banded=comp.use_banded,
    )
