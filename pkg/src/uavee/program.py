"""Structured description of one smooth convex program.

A program is always a minimization over x of

    c_lin @ x + c_const + sum of nonlinear terms(target = objective)
    s.t.  A_eq x = b_eq
          g_i(x) <= 0   where g_i = (G_in x + h_in)_i + sum of terms(target = i)

Nonlinear terms come from a fixed library with hand-coded derivatives:

    QUAD   coeff * (sum_j (x[i_j] - p_j)^2 + k)          convex quadratic
    CUBE   coeff * (x[i]^2 + x[j]^2)^{3/2}               cubed 2-D norm
    QOL    coeff * (k + (x[i]^2 + x[j]^2)/gsq) / x[t]    quadratic-over-linear, x[t] > 0
    RECIP  coeff / x[i]                                  reciprocal, x[i] > 0

Variables feeding a QOL/RECIP denominator carry a domain floor the solver's
line search must respect.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import kernels

__all__ = [
    "QUAD",
    "CUBE",
    "QOL",
    "RECIP",
    "TermSet",
    "VariableLayout",
    "ConvexProgram",
    "ProgramBuilder",
    "scale_program",
    "dump_program",
]

QUAD, CUBE, QOL, RECIP = 0, 1, 2, 3
_KIND_NAMES = {QUAD: "quad", CUBE: "cube", QOL: "qol", RECIP: "recip"}

# lower-triangle slot order of the per-term 3x3 Hessian
HESS_SLOT_PAIRS = ((0, 0), (1, 0), (1, 1), (2, 0), (2, 1), (2, 2))


@dataclass(frozen=True)
class TermSet:
    """Struct-of-arrays container for nonlinear terms."""

    kind: np.ndarray    # (n_t,) int64
    target: np.ndarray  # (n_t,) int64, -1 = objective
    coeff: np.ndarray   # (n_t,) float64
    idx: np.ndarray     # (n_t, 3) int64, -1 padded
    params: np.ndarray  # (n_t, 4) float64

    @property
    def n_terms(self):
        return self.kind.shape[0]

    @staticmethod
    def empty():
        return TermSet(
            kind=np.zeros(0, dtype=np.int64),
            target=np.zeros(0, dtype=np.int64),
            coeff=np.zeros(0),
            idx=np.zeros((0, 3), dtype=np.int64),
            params=np.zeros((0, 4)),
        )


@dataclass(frozen=True)
class VariableLayout:
    """Slot-major variable indexing for trajectory programs.

    Per-slot order: qx, qy, vx, vy, ax, ay, [tau,] L, I, d_1..d_M.
    """

    n_slots: int
    n_jammers: int
    with_tau: bool

    @property
    def stride(self):
        return 8 + self.n_jammers + (1 if self.with_tau else 0)

    @property
    def n_vars(self):
        return self.n_slots * self.stride

    def _block(self, offset, width):
        base = np.arange(self.n_slots)[:, None] * self.stride + offset
        return (base + np.arange(width)[None, :]).astype(np.int64)

    @property
    def q(self):
        return self._block(0, 2)

    @property
    def v(self):
        return self._block(2, 2)

    @property
    def a(self):
        return self._block(4, 2)

    @property
    def tau(self):
        if not self.with_tau:
            return None
        return self._block(6, 1)[:, 0]

    @property
    def L(self):
        return self._block(7 if self.with_tau else 6, 1)[:, 0]

    @property
    def I(self):
        return self._block(8 if self.with_tau else 7, 1)[:, 0]

    @property
    def d(self):
        off = 9 if self.with_tau else 8
        return self._block(off, self.n_jammers).T if self.n_jammers else np.zeros(
            (0, self.n_slots), dtype=np.int64
        )

    def pack(self, traj, slacks):
        x = np.zeros(self.n_vars)
        x[self.q] = traj.q
        x[self.v] = traj.v
        x[self.a] = traj.a
        if self.with_tau:
            x[self.tau] = slacks.tau
        x[self.L] = slacks.L
        x[self.I] = slacks.I
        if self.n_jammers:
            x[self.d] = slacks.d
        return x

    def unpack(self, x):
        from .initpath import SlackSet, Theta
        from .physics import Trajectory

        traj = Trajectory(x[self.q], x[self.v], x[self.a])
        tau = x[self.tau] if self.with_tau else traj.speeds()
        d = x[self.d] if self.n_jammers else np.zeros((0, self.n_slots))
        return Theta(traj, SlackSet(tau=tau, L=x[self.L], I=x[self.I], d=d))

    def var_name(self, j):
        slot, off = divmod(j, self.stride)
        names = ["qx", "qy", "vx", "vy", "ax", "ay"]
        if self.with_tau:
            names.append("tau")
        names += ["L", "I"] + [f"d{m}" for m in range(self.n_jammers)]
        return f"{names[off]}[{slot}]"


@dataclass
class ConvexProgram:
    """Immutable-once-built smooth convex program (see module docstring)."""

    n_vars: int
    c_lin: np.ndarray
    c_const: float
    terms: TermSet
    a_eq: sp.csr_matrix
    b_eq: np.ndarray
    g_lin: sp.csr_matrix
    h_lin: np.ndarray
    var_scale: np.ndarray
    dom_lower: np.ndarray
    layout: VariableLayout | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_eq(self):
        return self.a_eq.shape[0]

    @property
    def n_ineq(self):
        return self.g_lin.shape[0]

    def term_eval(self, x):
        t = self.terms
        return kernels.eval_terms(
            np.asarray(x, dtype=float), t.kind, t.coeff, t.idx, t.params
        )

    def objective_value(self, x):
        val, _, _ = self.term_eval(x)
        obj_mask = self.terms.target < 0
        return float(self.c_lin @ x + self.c_const + val[obj_mask].sum())

    def objective_grad(self, x):
        """Returns (value, gradient)."""
        val, grad, _ = self.term_eval(x)
        obj = self.terms.target < 0
        g = self.c_lin.copy()
        f = self.c_lin @ x + self.c_const
        idx = self.terms.idx[obj]
        gobj = grad[obj]
        valid = idx >= 0
        np.add.at(g, idx[valid], gobj[valid])
        return float(f + val[obj].sum()), g

    def constraint_values(self, x):
        g = self.g_lin @ x + self.h_lin
        con = self.terms.target >= 0
        if np.any(con):
            np.add.at(g, self.terms.target[con], self.term_eval(x)[0][con])
        return g

    def constraint_jacobian(self, x):
        """Full Jacobian as CSR (diagnostic path; the solver uses a compiled one)."""
        _, grad, _ = self.term_eval(x)
        con = self.terms.target >= 0
        rows = [self.g_lin.tocoo().row]
        cols = [self.g_lin.tocoo().col]
        vals = [self.g_lin.tocoo().data]
        idx = self.terms.idx[con]
        valid = idx >= 0
        rows.append(np.repeat(self.terms.target[con], 3)[valid.ravel()])
        cols.append(idx[valid])
        vals.append(grad[con][valid])
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n_ineq, self.n_vars),
        )


class ProgramBuilder:
    """Incremental construction of a ConvexProgram."""

    def __init__(self, n_vars, layout=None):
        self.n_vars = n_vars
        self.layout = layout
        self.c_lin = np.zeros(n_vars)
        self.c_const = 0.0
        self.var_scale = np.ones(n_vars)
        self.dom_lower = np.full(n_vars, -np.inf)
        self._kind = []
        self._target = []
        self._coeff = []
        self._idx = []
        self._params = []
        self._eq = []      # (cols, vals, rhs)
        self._ineq = []    # (cols, vals, const)

    # -- objective -----------------------------------------------------------
    def add_linear_objective(self, cols, vals):
        self.c_lin[np.asarray(cols, dtype=int)] += np.asarray(vals, dtype=float)

    def add_const_objective(self, value):
        self.c_const += float(value)

    # -- constraints ---------------------------------------------------------
    def add_ineq(self, cols=(), vals=(), const=0.0):
        """New inequality row (linear part); returns its index."""
        self._ineq.append(
            (np.asarray(cols, dtype=np.int64), np.asarray(vals, dtype=float), float(const))
        )
        return len(self._ineq) - 1

    def add_eq(self, cols, vals, rhs):
        self._eq.append(
            (np.asarray(cols, dtype=np.int64), np.asarray(vals, dtype=float), float(rhs))
        )
        return len(self._eq) - 1

    # -- nonlinear terms -----------------------------------------------------
    def _push(self, kind, coeff, idx, params, target):
        if coeff < 0.0:
            raise ValueError("nonlinear terms must have nonnegative coefficients (convexity)")
        idx3 = np.full(3, -1, dtype=np.int64)
        idx3[: len(idx)] = idx
        p4 = np.zeros(4)
        p4[: len(params)] = params
        self._kind.append(kind)
        self._target.append(target)
        self._coeff.append(float(coeff))
        self._idx.append(idx3)
        self._params.append(p4)

    def add_quad(self, idx, centers, const, coeff, target=-1):
        """coeff * (sum (x[idx]-centers)^2 + const)"""
        idx = list(idx)
        centers = list(centers)
        p = centers + [0.0] * (3 - len(centers)) + [const]
        self._push(QUAD, coeff, idx, p, target)

    def add_cube(self, idx, coeff, target=-1):
        """coeff * norm(x[idx])^3 for a 1- or 2-vector"""
        self._push(CUBE, coeff, list(idx), [], target)

    def add_qol(self, quad_idx, denom_idx, gsq, const, coeff, target=-1):
        """coeff * (const + sum(x[quad_idx]^2)/gsq) / x[denom_idx]"""
        idx = list(quad_idx) + [-1] * (2 - len(quad_idx)) + [denom_idx]
        self._push(QOL, coeff, idx, [gsq, const], target)
        self.dom_lower[denom_idx] = max(self.dom_lower[denom_idx], 0.0)

    def add_recip(self, idx, coeff, target=-1):
        """coeff / x[idx]"""
        self._push(RECIP, coeff, [idx], [], target)
        self.dom_lower[idx] = max(self.dom_lower[idx], 0.0)

    # -- finalize --------------------------------------------------------------
    def _csr(self, rows, n_rows):
        r, c, v = [], [], []
        rhs = np.zeros(n_rows)
        for i, (cols, vals, const) in enumerate(rows):
            rhs[i] = const
            if len(cols):
                r.append(np.full(len(cols), i, dtype=np.int64))
                c.append(cols)
                v.append(vals)
        if r:
            mat = sp.csr_matrix(
                (np.concatenate(v), (np.concatenate(r), np.concatenate(c))),
                shape=(n_rows, self.n_vars),
            )
        else:
            mat = sp.csr_matrix((n_rows, self.n_vars))
        return mat, rhs

    def build(self, meta=None):
        n_t = len(self._kind)
        if n_t:
            terms = TermSet(
                kind=np.asarray(self._kind, dtype=np.int64),
                target=np.asarray(self._target, dtype=np.int64),
                coeff=np.asarray(self._coeff),
                idx=np.stack(self._idx).astype(np.int64),
                params=np.stack(self._params),
            )
        else:
            terms = TermSet.empty()
        m_i = len(self._ineq)
        if terms.n_terms and terms.target.max(initial=-1) >= m_i:
            raise ValueError("term targets a nonexistent inequality row")
        a_eq, b_eq = self._csr(self._eq, len(self._eq))
        g_lin, h_lin = self._csr(self._ineq, m_i)
        return ConvexProgram(
            n_vars=self.n_vars,
            c_lin=self.c_lin,
            c_const=self.c_const,
            terms=terms,
            a_eq=a_eq,
            b_eq=b_eq,
            g_lin=g_lin,
            h_lin=h_lin,
            var_scale=self.var_scale,
            dom_lower=self.dom_lower,
            layout=self.layout,
            meta=dict(meta or {}),
        )


def _group_scale(col_scale, idx, label):
    """Shared scale of a term's index group (must be constant within the group)."""
    valid = [i for i in idx if i >= 0]
    if not valid:
        return 1.0
    s = col_scale[valid[0]]
    for i in valid[1:]:
        if abs(col_scale[i] / s - 1.0) > 1e-12:
            raise ValueError(f"{label}: variable scales differ within one term group")
    return s


def scale_program(prog, col_scale=None, eq_row_scale=None, in_row_scale=None, obj_scale=1.0):
    """Equivalent program over x_scaled = x / col_scale with scaled rows/objective.

    Every term kind is closed under this transformation, so the scaled program
    uses the same library.
    """
    d = np.ones(prog.n_vars) if col_scale is None else np.asarray(col_scale, dtype=float)
    r_eq = np.ones(prog.n_eq) if eq_row_scale is None else np.asarray(eq_row_scale, dtype=float)
    r_in = np.ones(prog.n_ineq) if in_row_scale is None else np.asarray(in_row_scale, dtype=float)
    fs = float(obj_scale)

    t = prog.terms
    coeff = t.coeff.copy()
    params = t.params.copy()
    row = np.full(t.n_terms, fs)
    con = t.target >= 0
    if con.any():
        row[con] = r_in[t.target[con]]
    for k in range(t.n_terms):
        kind = t.kind[k]
        if kind == QUAD:
            ds = _group_scale(d, t.idx[k], "quad")
            coeff[k] = t.coeff[k] * ds * ds / row[k]
            params[k, :3] = t.params[k, :3] / ds
            params[k, 3] = t.params[k, 3] / (ds * ds)
        elif kind == CUBE:
            ds = _group_scale(d, t.idx[k], "cube")
            coeff[k] = t.coeff[k] * ds**3 / row[k]
        elif kind == QOL:
            dq = _group_scale(d, t.idx[k, :2], "qol")
            dt_ = d[t.idx[k, 2]]
            coeff[k] = t.coeff[k] / (dt_ * row[k])
            params[k, 0] = t.params[k, 0] / (dq * dq)
        elif kind == RECIP:
            coeff[k] = t.coeff[k] / (d[t.idx[k, 0]] * row[k])
        else:
            raise ValueError(f"unknown term kind {kind}")
    terms = TermSet(kind=t.kind, target=t.target, coeff=coeff, idx=t.idx, params=params)

    def row_col_scale(mat, rows):
        if mat.shape[0] == 0:
            return mat.copy()
        return (sp.diags(1.0 / rows) @ mat @ sp.diags(d)).tocsr()

    dom = prog.dom_lower.copy()
    finite = np.isfinite(dom)
    dom[finite] = dom[finite] / d[finite]

    return ConvexProgram(
        n_vars=prog.n_vars,
        c_lin=d * prog.c_lin / fs,
        c_const=prog.c_const / fs,
        terms=terms,
        a_eq=row_col_scale(prog.a_eq, r_eq),
        b_eq=prog.b_eq / r_eq if prog.n_eq else prog.b_eq.copy(),
        g_lin=row_col_scale(prog.g_lin, r_in),
        h_lin=prog.h_lin / r_in if prog.n_ineq else prog.h_lin.copy(),
        var_scale=np.ones(prog.n_vars),
        dom_lower=dom,
        layout=prog.layout,
        meta=dict(prog.meta),
    )


def dump_program(prog, path):
    """Human-readable dump: variable layout, objective terms, constraint list."""

    def vname(j):
        return prog.layout.var_name(j) if prog.layout is not None else f"x{j}"

    t = prog.terms

    def term_str(k):
        ids = [vname(i) for i in t.idx[k] if i >= 0]
        p = t.params[k]
        kind = t.kind[k]
        if kind == QUAD:
            centers = p[: len(ids)]
            inner = " + ".join(
                f"({v} - {c:.6g})^2" if c else f"{v}^2" for v, c in zip(ids, centers)
            )
            return f"{t.coeff[k]:.6g} * ({inner} + {p[3]:.6g})"
        if kind == CUBE:
            return f"{t.coeff[k]:.6g} * norm({', '.join(ids)})^3"
        if kind == QOL:
            quad = [vname(i) for i in t.idx[k, :2] if i >= 0]
            den = vname(t.idx[k, 2])
            return (
                f"{t.coeff[k]:.6g} * ({p[1]:.6g} + ({' + '.join(q + '^2' for q in quad) or '0'})"
                f"/{p[0]:.6g}) / {den}"
            )
        return f"{t.coeff[k]:.6g} / {ids[0]}"

    def lin_str(mat, row, const):
        start, stop = mat.indptr[row], mat.indptr[row + 1]
        parts = [
            f"{mat.data[p]:+.6g}*{vname(mat.indices[p])}" for p in range(start, stop)
        ]
        if const:
            parts.append(f"{const:+.6g}")
        return " ".join(parts) if parts else "0"

    with open(path, "w") as fh:
        fh.write(f"variables: {prog.n_vars}\n")
        if prog.layout is not None:
            lay = prog.layout
            fh.write(
                f"layout: {lay.n_slots} slots x {lay.stride} "
                f"(tau={'yes' if lay.with_tau else 'no'}, jammers={lay.n_jammers})\n"
            )
        fh.write("\nminimize:\n")
        nz = np.flatnonzero(prog.c_lin)
        for j in nz:
            fh.write(f"  {prog.c_lin[j]:+.6g} * {vname(j)}\n")
        if prog.c_const:
            fh.write(f"  {prog.c_const:+.6g}\n")
        for k in range(t.n_terms):
            if t.target[k] < 0:
                fh.write(f"  + {term_str(k)}\n")
        fh.write(f"\nequalities ({prog.n_eq}):\n")
        for r in range(prog.n_eq):
            fh.write(f"  {lin_str(prog.a_eq, r, 0.0)} = {prog.b_eq[r]:.6g}\n")
        fh.write(f"\ninequalities ({prog.n_ineq}):\n")
        by_row = {}
        for k in range(t.n_terms):
            if t.target[k] >= 0:
                by_row.setdefault(int(t.target[k]), []).append(term_str(k))
        for r in range(prog.n_ineq):
            extra = "".join(f" + {s}" for s in by_row.get(r, []))
            fh.write(f"  {lin_str(prog.g_lin, r, prog.h_lin[r])}{extra} <= 0\n")
