"""Discrete maximum principles and the harmonic barrier.

The ABP check evaluates, at every interior node where a discrete convex
function dips negative, the ratio of the dip to
``[diam(domain) * d(x, boundary) * total MA mass]^(1/2)`` and reports the
largest ratio as the empirical stability constant.  The harmonic barrier is
the solution of the discrete Laplace equation with the same boundary data;
it dominates every discrete convex function with that data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .meshfn import MeshFunction, discrete_laplacian_all, is_discrete_convex
from . import measure as _measure

__all__ = [
    "ABPReport",
    "PrincipleError",
    "SolverError",
    "abp_check",
    "laplace_max_principle_check",
    "harmonic_solve",
    "barrier_compare",
]

# direct sparse factorization up to this many unknowns, iterative above
DIRECT_SOLVE_LIMIT = 100_000


class PrincipleError(ValueError):
    """A maximum-principle precondition is violated."""


class SolverError(RuntimeError):
    """The linear solver did not reach the required residual."""


@dataclass
class ABPReport:
    """Per-node ABP ratios of a discrete convex function z >= 0 on the
    boundary.  Ratios are recorded only where z < 0."""

    empirical_constant: float
    passed: bool
    configured_constant: float
    total_mass: float
    rows: list = field(default_factory=list)  # (node, z, dist, bound_core, ratio)


def abp_check(z, bound_constant, measure=None):
    """Evaluate the discrete ABP inequality at every interior node.

    Preconditions (verified): z is discrete convex and z >= 0 on the
    boundary nodes.  Returns the report with the empirical constant
    ``max(-z(x) / sqrt(diam * d(x) * mass))`` over nodes with z(x) < 0.
    """
    lat = z.lattice
    scale = max(1.0, z.oscillation())
    rep = is_discrete_convex(z)
    if not rep.ok:
        raise PrincipleError(
            f"abp_check requires a discrete convex function; witness node "
            f"{rep.witness_node} direction {rep.witness_direction} "
            f"value {rep.min_value:.3e}"
        )
    bvals = z.boundary_values
    if bvals.size and bvals.min() < -1e-12 * scale:
        b = int(np.argmin(bvals))
        raise PrincipleError(
            f"abp_check requires z >= 0 on the boundary; node "
            f"{tuple(lat.boundary_coords[b])} has z = {bvals[b]:.3e}"
        )
    if measure is None:
        measure = _measure.ma_measure(z, check_convex=False)
    total = measure.total
    diam = lat.domain.diameter()
    dists = lat.interior_distances_to_boundary()

    rows = []
    empirical = 0.0
    for k in range(lat.n_interior):
        zk = z.values[k]
        if zk >= 0.0:
            continue
        core = math.sqrt(max(diam * dists[k] * total, 0.0))
        ratio = math.inf if core == 0.0 else -zk / core
        rows.append((tuple(lat.coords[k]), float(zk), float(dists[k]), core, ratio))
        empirical = max(empirical, ratio)
    return ABPReport(
        empirical_constant=empirical,
        passed=bool(empirical <= bound_constant),
        configured_constant=bound_constant,
        total_mass=total,
        rows=rows,
    )


def laplace_max_principle_check(z, tol=None):
    """Discrete maximum principle for the discrete Laplacian.

    Preconditions (verified): the discrete Laplacian of z is >= 0 on the
    interior and z <= 0 on the boundary.  Returns (ok, max interior value,
    node of the max); ok means the interior stays <= tol.
    """
    lat = z.lattice
    scale = max(1.0, z.oscillation())
    if tol is None:
        tol = 1e-10 * scale
    lap = discrete_laplacian_all(z)
    pre_tol = 1e-10 * scale / max(lat.h**2, 1e-300)
    if lap.min() < -pre_tol:
        k = int(np.argmin(lap))
        raise PrincipleError(
            f"laplace_max_principle_check requires a subharmonic input; "
            f"node {tuple(lat.coords[k])} has discrete Laplacian {lap[k]:.3e}"
        )
    bvals = z.boundary_values
    if bvals.size and bvals.max() > 1e-12 * scale:
        b = int(np.argmax(bvals))
        raise PrincipleError(
            f"laplace_max_principle_check requires z <= 0 on the boundary; "
            f"node {tuple(lat.boundary_coords[b])} has z = {bvals[b]:.3e}"
        )
    k = int(np.argmax(z.interior_values))
    vmax = float(z.values[k])
    return vmax <= tol, vmax, tuple(lat.coords[k])


def _laplacian_system(lattice):
    """Sparse interior system A w = -B g of the discrete Laplacian with
    unequal arms near a projected boundary."""
    n = lattice.n_interior
    rows, cols, vals = [], [], []
    brows, bcols, bvals = [], [], []
    ids = lattice.axis_neighbor_ids
    arms = lattice.axis_arms
    for k in range(n):
        diag = 0.0
        for axis in (0, 1):
            dp, dm = (0, 1) if axis == 0 else (2, 3)
            a, b = arms[k, dp], arms[k, dm]
            cp = 2.0 / (a * (a + b))
            cm = 2.0 / (b * (a + b))
            diag -= cp + cm
            for nb, c in ((ids[k, dp], cp), (ids[k, dm], cm)):
                if nb < n:
                    rows.append(k)
                    cols.append(int(nb))
                    vals.append(c)
                else:
                    brows.append(k)
                    bcols.append(int(nb) - n)
                    bvals.append(c)
        rows.append(k)
        cols.append(k)
        vals.append(diag)
    A = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    B = sp.csr_matrix((bvals, (brows, bcols)), shape=(n, lattice.n_boundary))
    return A, B


def harmonic_solve(lattice, g):
    """Solve the discrete Laplace equation with Dirichlet data g.

    ``g`` takes an (n, 2) array of boundary coordinates (projected boundary
    nodes carry their exact coordinates).  The residual must reach
    1e-12 * osc(g); the solution is checked against the discrete min/max
    bounds of the boundary data.
    """
    gb = np.asarray(g(lattice.boundary_coords), dtype=float)
    if gb.shape != (lattice.n_boundary,):
        raise ValueError("boundary data has the wrong shape")
    if not np.all(np.isfinite(gb)):
        raise ValueError("boundary data must be finite")
    osc = float(gb.max() - gb.min()) if gb.size else 0.0

    A, B = _laplacian_system(lattice)
    rhs = -B @ gb
    n = lattice.n_interior
    residual_history = []
    if n <= DIRECT_SOLVE_LIMIT:
        w = spla.spsolve(A.tocsc(), rhs)
        residual_history.append(float(np.abs(A @ w - rhs).max()))
    else:
        diag = A.diagonal()
        M = sp.diags(1.0 / diag)

        def record(xk):
            residual_history.append(float(np.abs(A @ xk - rhs).max()))

        w, info = spla.bicgstab(A, rhs, rtol=1e-14, atol=1e-14 * max(osc, 1.0),
                                maxiter=20 * n, M=M, callback=record)
        if info != 0:
            raise SolverError(
                f"iterative Laplace solve did not converge (info={info}); "
                f"residual history tail {residual_history[-5:]}"
            )

    res = float(np.abs(A @ w - rhs).max())
    # backward-error floor: rounding in rows of size ~1/h^2 acting on w
    row_norm = float(np.abs(A).sum(axis=1).max() + np.abs(B).sum(axis=1).max())
    floor = 64 * np.finfo(float).eps * row_norm * max(
        1.0, float(np.abs(w).max()) if w.size else 0.0, float(np.abs(gb).max()) if gb.size else 0.0
    )
    tol = max(1e-12 * osc, floor)
    if res > tol:
        raise SolverError(
            f"Laplace solve residual {res:.3e} exceeds {tol:.3e}; "
            f"history {residual_history[-5:]}"
        )
    if gb.size:
        guard = 1e-10 * max(osc, 1.0)
        if w.size and (w.min() < gb.min() - guard or w.max() > gb.max() + guard):
            raise SolverError("harmonic solution violates the boundary data bounds")
    values = np.concatenate([w, gb])
    return MeshFunction(lattice, values)


def barrier_compare(u, w, tol=1e-8):
    """Check u <= w + tol everywhere; returns (ok, max(u - w)).

    ``u`` must be a discrete convex function and ``w`` the harmonic barrier
    with the same boundary data on the same lattice.
    """
    if u.lattice is not w.lattice:
        raise PrincipleError("barrier_compare requires functions on the same lattice")
    diff = u.values - w.values
    worst = float(diff.max())
    return worst <= tol, worst
