"""Numba kernels for the wide-stencil Monge-Ampere operator and the
nonlinear Gauss-Seidel sweep.

The operator value at a node is the minimum over orthogonal direction pairs
of ``max(d1,0)*max(d2,0) + min(d1,0) + min(d2,0)`` where d1, d2 are the
directional second differences.  The axis pair is always present (with
unequal arms near a projected boundary); wide pairs participate where both
directions have exact-step endpoints.

All arrays are laid out per interior node k:
  ax_ids[k]  node ids of the +x, -x, +y, -y neighbors
  ax_cp/ax_cm/ax_cc[k, axis]  three-point coefficients per axis
  pair_ids[k, p]  node ids (e+, e-, eperp+, eperp-) of wide pair p
  pair_avail[k, p]  both directions available
  pair_inv[p]  normalizations 1/(h^2 |e|^2), 1/(h^2 |eperp|^2)
"""

import numpy as np
from numba import njit


@njit(cache=True)
def ma_value(t, k, u, ax_ids, ax_cp, ax_cm, ax_cc, pair_ids, pair_avail, pair_inv):
    a = ax_cp[k, 0] * u[ax_ids[k, 0]] + ax_cm[k, 0] * u[ax_ids[k, 1]] - ax_cc[k, 0] * t
    b = ax_cp[k, 1] * u[ax_ids[k, 2]] + ax_cm[k, 1] * u[ax_ids[k, 3]] - ax_cc[k, 1] * t
    pa = a if a > 0.0 else 0.0
    pb = b if b > 0.0 else 0.0
    na = a if a < 0.0 else 0.0
    nb = b if b < 0.0 else 0.0
    m = pa * pb + na + nb
    for p in range(pair_ids.shape[1]):
        if pair_avail[k, p]:
            a = (u[pair_ids[k, p, 0]] + u[pair_ids[k, p, 1]] - 2.0 * t) * pair_inv[p, 0]
            b = (u[pair_ids[k, p, 2]] + u[pair_ids[k, p, 3]] - 2.0 * t) * pair_inv[p, 1]
            pa = a if a > 0.0 else 0.0
            pb = b if b > 0.0 else 0.0
            na = a if a < 0.0 else 0.0
            nb = b if b < 0.0 else 0.0
            val = pa * pb + na + nb
            if val < m:
                m = val
    return m


@njit(cache=True)
def ma_all(u, n_int, ax_ids, ax_cp, ax_cm, ax_cc, pair_ids, pair_avail, pair_inv):
    out = np.empty(n_int)
    for k in range(n_int):
        out[k] = ma_value(
            u[k], k, u, ax_ids, ax_cp, ax_cm, ax_cc, pair_ids, pair_avail, pair_inv
        )
    return out


@njit(cache=True)
def gs_sweep(
    u,
    n_int,
    f,
    lo0,
    ax_ids,
    ax_cp,
    ax_cm,
    ax_cc,
    pair_ids,
    pair_avail,
    pair_inv,
    n_inner,
    skip_tol,
):
    """One lexicographic Gauss-Seidel sweep: at each node solve
    MA(t) = f by bisection in the center value t (MA is strictly decreasing
    in t with the neighbors frozen)."""
    for k in range(n_int):
        t = u[k]
        g = (
            ma_value(t, k, u, ax_ids, ax_cp, ax_cm, ax_cc, pair_ids, pair_avail, pair_inv)
            - f[k]
        )
        if -skip_tol <= g <= skip_tol:
            continue
        if g > 0.0:
            # root lies above the current value
            lo = t
            hi = t
            step = 1.0 if t == 0.0 else (abs(t) * 0.5 + 1.0)
            gh = g
            guard = 0
            while gh > 0.0 and guard < 128:
                hi += step
                step *= 2.0
                gh = (
                    ma_value(
                        hi, k, u, ax_ids, ax_cp, ax_cm, ax_cc, pair_ids, pair_avail, pair_inv
                    )
                    - f[k]
                )
                guard += 1
        else:
            hi = t
            lo = lo0 if lo0 < t else t - 1.0
            gl = (
                ma_value(lo, k, u, ax_ids, ax_cp, ax_cm, ax_cc, pair_ids, pair_avail, pair_inv)
                - f[k]
            )
            step = hi - lo
            guard = 0
            while gl < 0.0 and guard < 128:
                lo -= step
                step *= 2.0
                gl = (
                    ma_value(
                        lo, k, u, ax_ids, ax_cp, ax_cm, ax_cc, pair_ids, pair_avail, pair_inv
                    )
                    - f[k]
                )
                guard += 1
        for _ in range(n_inner):
            mid = 0.5 * (lo + hi)
            gm = (
                ma_value(mid, k, u, ax_ids, ax_cp, ax_cm, ax_cc, pair_ids, pair_avail, pair_inv)
                - f[k]
            )
            if gm > 0.0:
                lo = mid
            else:
                hi = mid
        u[k] = 0.5 * (lo + hi)
    return u
