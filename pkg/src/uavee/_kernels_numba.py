"""Numba implementations of the hot evaluation/assembly kernels.

Same contracts as _kernels_numpy; see there for slot layouts.
"""

import numpy as np
from numba import njit

QUAD, CUBE, QOL, RECIP = 0, 1, 2, 3


@njit(cache=True)
def _eval_terms_into(x, kind, coeff, idx, params, val, grad, hess):
    n_t = kind.shape[0]
    for t in range(n_t):
        c = coeff[t]
        k = kind[t]
        for a in range(3):
            grad[t, a] = 0.0
        for a in range(6):
            hess[t, a] = 0.0
        if k == QUAD:
            acc = params[t, 3]
            for a in range(3):
                ia = idx[t, a]
                if ia >= 0:
                    dx = x[ia] - params[t, a]
                    acc += dx * dx
                    grad[t, a] = 2.0 * c * dx
            val[t] = c * acc
            if idx[t, 0] >= 0:
                hess[t, 0] = 2.0 * c
            if idx[t, 1] >= 0:
                hess[t, 2] = 2.0 * c
            if idx[t, 2] >= 0:
                hess[t, 5] = 2.0 * c
        elif k == CUBE:
            xi = x[idx[t, 0]]
            xj = x[idx[t, 1]] if idx[t, 1] >= 0 else 0.0
            r2 = xi * xi + xj * xj
            r = np.sqrt(r2)
            val[t] = c * r * r2
            if r > 1e-150:
                grad[t, 0] = 3.0 * c * r * xi
                grad[t, 1] = 3.0 * c * r * xj
                hess[t, 0] = 3.0 * c * (r + xi * xi / r)
                hess[t, 1] = 3.0 * c * xi * xj / r
                hess[t, 2] = 3.0 * c * (r + xj * xj / r)
        elif k == QOL:
            xi = x[idx[t, 0]] if idx[t, 0] >= 0 else 0.0
            xj = x[idx[t, 1]] if idx[t, 1] >= 0 else 0.0
            xt = x[idx[t, 2]]
            gsq = params[t, 0]
            u = params[t, 1] + (xi * xi + xj * xj) / gsq
            val[t] = c * u / xt
            grad[t, 2] = -c * u / (xt * xt)
            hess[t, 5] = 2.0 * c * u / (xt * xt * xt)
            if idx[t, 0] >= 0:
                grad[t, 0] = 2.0 * c * xi / (gsq * xt)
                hess[t, 0] = 2.0 * c / (gsq * xt)
                hess[t, 3] = -2.0 * c * xi / (gsq * xt * xt)
            if idx[t, 1] >= 0:
                grad[t, 1] = 2.0 * c * xj / (gsq * xt)
                hess[t, 2] = 2.0 * c / (gsq * xt)
                hess[t, 4] = -2.0 * c * xj / (gsq * xt * xt)
        else:  # RECIP
            xi = x[idx[t, 0]]
            val[t] = c / xi
            grad[t, 0] = -c / (xi * xi)
            hess[t, 0] = 2.0 * c / (xi * xi * xi)


def eval_terms(x, kind, coeff, idx, params):
    n_t = kind.shape[0]
    val = np.zeros(n_t)
    grad = np.zeros((n_t, 3))
    hess = np.zeros((n_t, 6))
    if n_t:
        _eval_terms_into(x, kind, coeff, idx, params, val, grad, hess)
    return val, grad, hess


@njit(cache=True)
def scatter_add(out, dest, vals):
    for k in range(dest.shape[0]):
        out[dest[k]] += vals[k]


@njit(cache=True)
def scatter_hess(out, dest, src, wsrc, hess_flat, weights):
    for k in range(dest.shape[0]):
        out[dest[k]] += hess_flat[src[k]] * weights[wsrc[k]]


@njit(cache=True)
def scatter_jdj(out, dest, pa, pb, row, jdata, dvec):
    for k in range(dest.shape[0]):
        out[dest[k]] += dvec[row[k]] * jdata[pa[k]] * jdata[pb[k]]
