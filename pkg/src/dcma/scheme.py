"""Monotone wide-stencil discretization of the Monge-Ampere equation.

The nodewise operator takes the minimum over orthogonal coprime direction
pairs (e, e_perp) of

    max(d_e u, 0) * max(d_perp u, 0) + min(d_e u, 0) + min(d_perp u, 0)

with d_e the directional second differences.  The product reproduces the
Hessian determinant for quadratics whose eigenvectors are stencil
directions; the additive negative parts penalize non-convexity, which makes
the operator degenerate elliptic: raising any neighbor value never decreases
it.  The axis pair always participates (with unequal arms near a projected
boundary), so the operator is defined at every interior node.

The nodewise equation MA(u) = f is strictly decreasing in the center value,
which gives the Gauss-Seidel bisection solver its bracket.  The residual
convention is F(u) = -MA(u) + f.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import _kernels, measure, principle
from .meshfn import (
    DirectionStencil,
    MeshFunction,
    lambda1_all,
    second_difference,
    second_difference_clipped,
)

__all__ = [
    "MAProblem",
    "SchemeConfig",
    "SolveReport",
    "SchemeError",
    "InputError",
    "SolverError",
    "ma_operator",
    "ma_operator_all",
    "ma_residual",
    "solve",
    "monotonicity_test",
    "consistency_test",
    "convex_envelope",
    "ConvexEnvelope",
    "stability_report",
]


class SchemeError(RuntimeError):
    pass


class InputError(ValueError):
    """Invalid problem data (negative density, bad config)."""


class SolverError(SchemeError):
    """Iteration budget exhausted before reaching the residual tolerance."""

    def __init__(self, msg, residual_history=None):
        super().__init__(msg)
        self.residual_history = residual_history or []


@dataclass
class MAProblem:
    """det D^2 u = f in the domain, u = g on the boundary.

    ``f`` and ``g`` take an (n, 2) array of points; ``exact`` is optional and
    only used for error studies.
    """

    domain: object
    f: object
    g: object
    exact: object = None
    name: str = ""


@dataclass
class SchemeConfig:
    stencil_width: int = 2
    solver: str = "gauss_seidel_bisection"
    dt: float | None = None
    tol_residual: float = 1e-8
    max_iters: int = 50_000
    init: str = "harmonic"
    init_values: np.ndarray | None = None
    max_inner: int = 60
    tol_convex: float | None = None

    def __post_init__(self):
        if self.tol_residual <= 0:
            raise InputError("tol_residual must be positive")
        if self.solver not in ("gauss_seidel_bisection", "explicit_euler"):
            raise InputError(f"unknown solver {self.solver!r}")
        if self.init not in ("harmonic", "boundary_min", "custom"):
            raise InputError(f"unknown init {self.init!r}")
        if self.dt is not None and self.dt <= 0:
            raise InputError("dt must be positive")


@dataclass
class SolveReport:
    iterations: int
    residual_history: list
    ma_total_mass: float
    sup_norm: float
    solver: str
    h: float
    min_lambda1: float
    discrete_convex: bool
    wall_time: float

    def to_dict(self):
        return {
            "iterations": self.iterations,
            "residual_history": self.residual_history,
            "ma_total_mass": self.ma_total_mass,
            "sup_norm": self.sup_norm,
            "solver": self.solver,
            "h": self.h,
            "min_lambda1": self.min_lambda1,
            "discrete_convex": self.discrete_convex,
            "wall_time": self.wall_time,
        }


# ---------------------------------------------------------------------------
# operator tables


class _OperatorTables:
    """Precomputed neighbor tables feeding the numba kernels."""

    def __init__(self, lattice, stencil):
        self.lattice = lattice
        self.stencil = stencil
        n = lattice.n_interior
        h = lattice.h

        ids = lattice.axis_neighbor_ids
        arms = lattice.axis_arms
        self.ax_ids = ids.astype(np.int64)
        self.ax_cp = np.empty((n, 2))
        self.ax_cm = np.empty((n, 2))
        self.ax_cc = np.empty((n, 2))
        for axis, (dp, dm) in enumerate(((0, 1), (2, 3))):
            a = arms[:, dp]
            b = arms[:, dm]
            self.ax_cp[:, axis] = 2.0 / (a * (a + b))
            self.ax_cm[:, axis] = 2.0 / (b * (a + b))
            self.ax_cc[:, axis] = 2.0 / (a * b)

        pairs = stencil.non_axis_pairs()
        np_pairs = len(pairs)
        self.pair_ids = np.zeros((n, max(np_pairs, 1), 4), dtype=np.int64)
        self.pair_avail = np.zeros((n, max(np_pairs, 1)), dtype=np.bool_)
        self.pair_inv = np.ones((max(np_pairs, 1), 2))
        self.pair_dirs = []
        for p, (i, j) in enumerate(pairs):
            e = stencil.directions[i]
            ep = stencil.directions[j]
            self.pair_dirs.append((e, ep))
            te = lattice.direction_table(e)
            tp = lattice.direction_table(ep)
            avail = (te >= 0).all(axis=1) & (tp >= 0).all(axis=1)
            self.pair_avail[:, p] = avail
            self.pair_ids[:, p, 0] = np.where(avail, te[:, 0], 0)
            self.pair_ids[:, p, 1] = np.where(avail, te[:, 1], 0)
            self.pair_ids[:, p, 2] = np.where(avail, tp[:, 0], 0)
            self.pair_ids[:, p, 3] = np.where(avail, tp[:, 1], 0)
            self.pair_inv[p, 0] = 1.0 / (h * h * (e[0] ** 2 + e[1] ** 2))
            self.pair_inv[p, 1] = 1.0 / (h * h * (ep[0] ** 2 + ep[1] ** 2))

    def kernel_args(self):
        return (
            self.ax_ids,
            self.ax_cp,
            self.ax_cm,
            self.ax_cc,
            self.pair_ids,
            self.pair_avail,
            self.pair_inv,
        )


def _tables(lattice, stencil):
    cache = getattr(lattice, "_ma_tables", None)
    if cache is None:
        cache = {}
        object.__setattr__(lattice, "_ma_tables", cache)
    key = stencil.width
    if key not in cache:
        cache[key] = _OperatorTables(lattice, stencil)
    return cache[key]


def ma_operator(u, k, stencil=None):
    """Wide-stencil Monge-Ampere operator at interior node k.

    Pure reference implementation built from the meshfn operators; the
    solver uses the table-driven kernels, which must agree with this.
    """
    if stencil is None:
        stencil = DirectionStencil.build()
    a = second_difference_clipped(u, k, 0)
    b = second_difference_clipped(u, k, 1)
    best = max(a, 0.0) * max(b, 0.0) + min(a, 0.0) + min(b, 0.0)
    ax = set(stencil.axis_pair)
    for i, j in stencil.pairs:
        if set((i, j)) & ax:
            continue
        da = second_difference(u, k, stencil.directions[i])
        db = second_difference(u, k, stencil.directions[j])
        if da is None or db is None:
            continue
        val = max(da, 0.0) * max(db, 0.0) + min(da, 0.0) + min(db, 0.0)
        best = min(best, val)
    return best


def ma_operator_all(u, stencil=None):
    """Operator values at every interior node (kernel path)."""
    if stencil is None:
        stencil = DirectionStencil.build()
    t = _tables(u.lattice, stencil)
    return _kernels.ma_all(u.values, u.lattice.n_interior, *t.kernel_args())


def ma_residual(u, f_values, stencil=None):
    """Residual F(u) = -MA(u) + f at every interior node."""
    return np.asarray(f_values, dtype=float) - ma_operator_all(u, stencil)


# ---------------------------------------------------------------------------
# solvers


def _initial_values(problem, lattice, config, g_arr):
    if config.init == "harmonic":
        return principle.harmonic_solve(lattice, problem.g).values.copy()
    if config.init == "boundary_min":
        vals = np.empty(lattice.n_nodes)
        vals[: lattice.n_interior] = g_arr.min() if g_arr.size else 0.0
        vals[lattice.n_interior :] = g_arr
        return vals
    if config.init_values is None:
        raise InputError("init='custom' requires init_values")
    vals = np.asarray(config.init_values, dtype=float).copy()
    if vals.shape != (lattice.n_nodes,):
        raise InputError("init_values must cover every lattice node")
    vals[lattice.n_interior :] = g_arr
    return vals


def solve(problem, lattice, config=None):
    """Solve the discrete Monge-Ampere problem on the lattice.

    Returns ``(u, report)`` with ``u = g`` exactly on the boundary nodes and
    the residual sup norm at or below ``config.tol_residual``.
    """
    if config is None:
        config = SchemeConfig()
    t_start = time.perf_counter()
    n = lattice.n_interior

    f_arr = np.asarray(problem.f(lattice.interior_coords), dtype=float)
    if f_arr.shape != (n,) or not np.all(np.isfinite(f_arr)):
        raise InputError("source density must be finite at every interior node")
    if f_arr.min() < 0.0:
        k = int(np.argmin(f_arr))
        raise InputError(
            f"source density is negative at node {tuple(lattice.interior_coords[k])}: "
            f"f = {f_arr[k]:.6g}"
        )
    g_arr = np.asarray(problem.g(lattice.boundary_coords), dtype=float)
    if g_arr.shape != (lattice.n_boundary,) or not np.all(np.isfinite(g_arr)):
        raise InputError("boundary data must be finite at every boundary node")

    stencil = DirectionStencil.build(config.stencil_width)
    tables = _tables(lattice, stencil)
    u = _initial_values(problem, lattice, config, g_arr)

    diam = lattice.domain.diameter()
    f_max = float(f_arr.max()) if f_arr.size else 0.0
    lo0 = min(float(g_arr.min()) if g_arr.size else 0.0, float(u.min()))
    lo0 -= diam * diam * f_max + 1.0

    history = []
    args = tables.kernel_args()
    if config.solver == "gauss_seidel_bisection":
        skip_tol = 0.05 * config.tol_residual
        iters = 0
        while True:
            res = float(np.abs(f_arr - _kernels.ma_all(u, n, *args)).max())
            history.append(res)
            if res <= config.tol_residual:
                break
            if iters >= config.max_iters:
                raise SolverError(
                    f"gauss_seidel_bisection: residual {res:.3e} after "
                    f"{iters} sweeps (tol {config.tol_residual:.1e}); "
                    f"history tail {history[-4:]}",
                    residual_history=history,
                )
            _kernels.gs_sweep(
                u, n, f_arr, lo0, *args, config.max_inner, skip_tol
            )
            iters += 1
    else:
        h = lattice.h
        iters = 0
        dt = config.dt
        prev_res = math.inf
        while True:
            m = _kernels.ma_all(u, n, *args)
            res = float(np.abs(f_arr - m).max())
            history.append(res)
            if res <= config.tol_residual:
                break
            if iters >= config.max_iters:
                raise SolverError(
                    f"explicit_euler: residual {res:.3e} after {iters} steps "
                    f"(tol {config.tol_residual:.1e}); history tail {history[-4:]}",
                    residual_history=history,
                )
            if dt is None or res > prev_res:
                slope = float(np.maximum(m, 0.0).max()) if m.size else 0.0
                bound = h * h / (4.0 * (1.0 + slope))
                dt = bound if dt is None else min(dt * 0.5, bound)
            u[:n] += dt * (m - f_arr)
            prev_res = res
            iters += 1

    u_mf = MeshFunction(lattice, u)
    lam = lambda1_all(u_mf, stencil)
    min_lam = float(lam.min())
    tol_convex = config.tol_convex
    if tol_convex is None:
        tol_convex = max(1e-10 * max(1.0, u_mf.oscillation()), 2.0 * config.tol_residual)
    mass = measure.ma_measure(u_mf, check_convex=False).total
    report = SolveReport(
        iterations=iters,
        residual_history=history,
        ma_total_mass=mass,
        sup_norm=float(np.abs(u).max()),
        solver=config.solver,
        h=lattice.h,
        min_lambda1=min_lam,
        discrete_convex=bool(min_lam >= -tol_convex),
        wall_time=time.perf_counter() - t_start,
    )
    return u_mf, report


# ---------------------------------------------------------------------------
# scheme property testers


def monotonicity_test(stencil=None, trials=10_000, seed=0, lattice=None):
    """Randomized check of the monotone-scheme property.

    Raising off-center values (the center fixed) must never decrease the
    operator MA - f; perturbing a node outside the stencil footprint must
    leave it unchanged.  Returns (ok, counterexample or None).
    """
    from .domain import Box, build_lattice

    if stencil is None:
        stencil = DirectionStencil.build()
    if lattice is None:
        lattice = build_lattice(Box(0.0, 0.0, 1.0, 1.0), 1.0 / 8.0)
    rng = np.random.default_rng(seed)
    n_all = lattice.n_nodes
    width = stencil.width

    for trial in range(trials):
        vals = rng.normal(size=n_all)
        u = MeshFunction(lattice, vals)
        k = int(rng.integers(lattice.n_interior))
        base = ma_operator(u, k, stencil)
        mode = trial % 10
        w = u.copy()
        if mode < 5:
            other = int(rng.integers(n_all))
            if other == k:
                continue
            w.values[other] += float(rng.uniform(0.0, 2.0))
            kind = "raise-one"
        elif mode < 9:
            bump = rng.uniform(0.0, 1.0, size=n_all)
            bump[k] = 0.0
            w.values += bump
            kind = "raise-all"
        else:
            # perturb a node beyond the stencil footprint of k
            mi = lattice.interior_mi[k]
            far = None
            order = rng.permutation(n_all)
            for cand in order:
                d = np.abs(lattice.coords[cand] / lattice.h - mi).max()
                if d > width + 1e-9:
                    far = int(cand)
                    break
            if far is None:
                continue
            w.values[far] += float(rng.uniform(-2.0, 2.0))
            perturbed = ma_operator(w, k, stencil)
            if perturbed != base:
                return False, {
                    "kind": "locality",
                    "node": tuple(lattice.coords[k]),
                    "before": base,
                    "after": perturbed,
                }
            continue
        perturbed = ma_operator(w, k, stencil)
        if perturbed < base - 1e-12 * max(1.0, abs(base)):
            return False, {
                "kind": kind,
                "node": tuple(lattice.coords[k]),
                "before": base,
                "after": perturbed,
            }
    return True, None


def consistency_test(lattice, stencil, hessians):
    """Operator error on convex quadratics q = x'Hx/2.

    Returns the per-quadratic max of MA(q) - det(H) over interior nodes where
    every stencil pair is available; the error is one-sided (the pair minimum
    never undershoots the determinant).
    """
    t = _tables(lattice, stencil)
    core = t.pair_avail.all(axis=1)
    if not core.any():
        raise InputError("lattice too coarse: no node sees the full stencil")
    errors = []
    for H in hessians:
        H = np.asarray(H, dtype=float)
        eig = np.linalg.eigvalsh(H)
        if eig.min() < -1e-12:
            raise InputError("consistency_test expects convex quadratics")
        pts = lattice.coords
        vals = 0.5 * (
            H[0, 0] * pts[:, 0] ** 2
            + 2 * H[0, 1] * pts[:, 0] * pts[:, 1]
            + H[1, 1] * pts[:, 1] ** 2
        )
        q = MeshFunction(lattice, vals)
        m = ma_operator_all(q, stencil)[core]
        det = float(np.linalg.det(H))
        errors.append(float(np.abs(m - det).max()))
    return errors


# ---------------------------------------------------------------------------
# convex envelope of boundary data


class ConvexEnvelope:
    """Supremum of affine functions below g on the sampled boundary.

    For up to 200 boundary samples the feasible plane vertices are
    enumerated exhaustively from active constraint triples; above that a
    linear program runs per evaluation point.
    """

    def __init__(self, domain, g, boundary_samples=64):
        if boundary_samples < 3:
            raise InputError("need at least 3 boundary samples")
        pts, _ = domain.boundary_points(boundary_samples)
        gz = np.asarray(g(pts), dtype=float)
        if not np.all(np.isfinite(gz)):
            raise InputError("boundary data must be finite at the samples")
        self.domain = domain
        self.samples = pts
        self.sample_values = gz
        self.n = boundary_samples
        self._planes = None
        if boundary_samples <= 200:
            self._planes = self._enumerate_planes(pts, gz)

    @staticmethod
    def _enumerate_planes(pts, gz):
        n = len(pts)
        triples = np.array(list(combinations(range(n), 3)))
        A = np.concatenate(
            [pts[triples], np.ones((len(triples), 3, 1))], axis=2
        )
        dets = np.linalg.det(A)
        scale = max(1.0, float(np.abs(pts).max())) ** 2
        good = np.abs(dets) > 1e-12 * scale
        planes = np.linalg.solve(A[good], gz[triples[good]][..., None])[..., 0]
        # feasibility against every sample
        tol = 1e-9 * (1.0 + float(np.abs(gz).max()))
        vals = planes[:, :2] @ pts.T + planes[:, 2:3]
        feasible = np.all(vals <= gz[None, :] + tol, axis=1)
        planes = planes[feasible]
        if planes.shape[0] == 0:
            raise InputError(
                "no feasible supporting plane: boundary samples are degenerate"
            )
        return planes

    def __call__(self, x):
        pts = np.asarray(x, dtype=float)
        single = pts.ndim == 1
        if single:
            pts = pts[None, :]
        if self._planes is not None:
            vals = (pts @ self._planes[:, :2].T + self._planes[:, 2]).max(axis=1)
        else:
            from scipy.optimize import linprog

            A_ub = np.concatenate([self.samples, np.ones((self.n, 1))], axis=1)
            vals = np.empty(pts.shape[0])
            for t, p in enumerate(pts):
                res = linprog(
                    c=-np.array([p[0], p[1], 1.0]),
                    A_ub=A_ub,
                    b_ub=self.sample_values,
                    bounds=[(None, None)] * 3,
                    method="highs",
                )
                if res.status == 3:
                    raise SchemeError(
                        f"envelope LP unbounded at {tuple(p)}: point outside "
                        "the hull of the boundary samples"
                    )
                if not res.success:
                    raise SchemeError(f"envelope LP failed: {res.message}")
                vals[t] = -res.fun
        return float(vals[0]) if single else vals


def convex_envelope(domain, g, boundary_samples, x):
    """Value of the convex envelope of the boundary data at x."""
    return ConvexEnvelope(domain, g, boundary_samples)(x)


# ---------------------------------------------------------------------------
# stability across refinements


def stability_report(problems, h_values, config=None, boundary_mode="projected"):
    """Sup norms of the discrete solutions across mesh lengths.

    Returns one row per (problem, h) and flags growth of more than 25%
    between consecutive levels of the same problem.
    """
    from .domain import build_lattice

    rows = []
    for problem in problems:
        prev = None
        for h in h_values:
            lattice = build_lattice(problem.domain, h, boundary_mode)
            _, report = solve(problem, lattice, config)
            grew = prev is not None and report.sup_norm > 1.25 * prev
            rows.append(
                {
                    "problem": problem.name or "unnamed",
                    "h": h,
                    "sup_norm": report.sup_norm,
                    "iterations": report.iterations,
                    "growth_flag": bool(grew),
                }
            )
            prev = report.sup_norm
    return rows
