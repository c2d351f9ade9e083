"""Pure-numpy implementations of the hot evaluation/assembly kernels."""

import numpy as np

QUAD, CUBE, QOL, RECIP = 0, 1, 2, 3


def eval_terms(x, kind, coeff, idx, params):
    """Value, gradient, and Hessian slots of every nonlinear term at x.

    Returns (val (n_t,), grad (n_t, 3), hess (n_t, 6)); the Hessian slots hold
    the lower triangle of the per-term 3x3 block in the order
    (0,0),(1,0),(1,1),(2,0),(2,1),(2,2).
    """
    n_t = kind.shape[0]
    val = np.zeros(n_t)
    grad = np.zeros((n_t, 3))
    hess = np.zeros((n_t, 6))
    if n_t == 0:
        return val, grad, hess

    valid = idx >= 0
    xv = np.where(valid, x[np.clip(idx, 0, None)], 0.0)

    m = kind == QUAD
    if np.any(m):
        dx = np.where(valid[m], xv[m] - params[m, :3], 0.0)
        c = coeff[m]
        val[m] = c * ((dx**2).sum(axis=1) + params[m, 3])
        grad[m] = 2.0 * c[:, None] * dx
        two_c = np.where(valid[m], 2.0 * c[:, None], 0.0)
        hess[m, 0] = two_c[:, 0]
        hess[m, 2] = two_c[:, 1]
        hess[m, 5] = two_c[:, 2]

    m = kind == CUBE
    if np.any(m):
        xi, xj = xv[m, 0], xv[m, 1]
        c = coeff[m]
        r2 = xi * xi + xj * xj
        r = np.sqrt(r2)
        val[m] = c * r * r2
        safe = r > 1e-150
        rs = np.where(safe, r, 1.0)
        grad[m, 0] = np.where(safe, 3.0 * c * r * xi, 0.0)
        grad[m, 1] = np.where(safe, 3.0 * c * r * xj, 0.0)
        hess[m, 0] = np.where(safe, 3.0 * c * (r + xi * xi / rs), 0.0)
        hess[m, 1] = np.where(safe, 3.0 * c * xi * xj / rs, 0.0)
        hess[m, 2] = np.where(safe, 3.0 * c * (r + xj * xj / rs), 0.0)

    m = kind == QOL
    if np.any(m):
        xi, xj, xt = xv[m, 0], xv[m, 1], xv[m, 2]
        ok_i, ok_j = valid[m, 0], valid[m, 1]
        gsq = params[m, 0]
        u = params[m, 1] + (xi * xi + xj * xj) / gsq
        c = coeff[m]
        val[m] = c * u / xt
        grad[m, 0] = np.where(ok_i, 2.0 * c * xi / (gsq * xt), 0.0)
        grad[m, 1] = np.where(ok_j, 2.0 * c * xj / (gsq * xt), 0.0)
        grad[m, 2] = -c * u / xt**2
        hess[m, 0] = np.where(ok_i, 2.0 * c / (gsq * xt), 0.0)
        hess[m, 2] = np.where(ok_j, 2.0 * c / (gsq * xt), 0.0)
        hess[m, 3] = np.where(ok_i, -2.0 * c * xi / (gsq * xt**2), 0.0)
        hess[m, 4] = np.where(ok_j, -2.0 * c * xj / (gsq * xt**2), 0.0)
        hess[m, 5] = 2.0 * c * u / xt**3

    m = kind == RECIP
    if np.any(m):
        xi = xv[m, 0]
        c = coeff[m]
        val[m] = c / xi
        grad[m, 0] = -c / xi**2
        hess[m, 0] = 2.0 * c / xi**3

    return val, grad, hess


def scatter_add(out, dest, vals):
    np.add.at(out, dest, vals)


def scatter_hess(out, dest, src, wsrc, hess_flat, weights):
    np.add.at(out, dest, hess_flat[src] * weights[wsrc])


def scatter_jdj(out, dest, pa, pb, row, jdata, dvec):
    np.add.at(out, dest, dvec[row] * jdata[pa] * jdata[pb])
