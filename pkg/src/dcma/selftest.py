"""Self-contained property suites behind the ``selftest`` CLI subcommand.

Each suite returns (name, passed, detail); the runner prints one line per
suite and reports overall success.  These overlap the pytest suite on
purpose: they ship with the package and need no test files.
"""

from __future__ import annotations

import numpy as np

from . import measure, principle, scheme
from .domain import Box, Disk, build_lattice
from .meshfn import DirectionStencil, MeshFunction, lambda1_h, second_difference

__all__ = ["run_selftest"]


def _sample(lattice, fn):
    return MeshFunction.from_callable(lattice, lambda p: fn(p[:, 0], p[:, 1]))


def _random_convex(lattice, rng):
    planes = rng.normal(size=(int(rng.integers(3, 8)), 3))
    pts = lattice.coords
    vals = np.max([a * pts[:, 0] + b * pts[:, 1] + c for a, b, c in planes], axis=0)
    return MeshFunction(lattice, vals)


def _suite_lattice(seed):
    for domain, h in ((Box(0, 0, 1, 1), 0.25), (Disk(1.0), 0.3)):
        lat = build_lattice(domain, h)
        if lat.n_interior == 0:
            return False, "empty interior"
        if not np.all(lat.axis_neighbor_ids >= 0):
            return False, "incomplete axis neighbors"
        if not np.all(lat.axis_arms <= h * (1 + 1e-12)):
            return False, "axis arm exceeds h"
    return True, ""


def _suite_quadratic_exactness(seed):
    rng = np.random.default_rng(seed)
    lat = build_lattice(Box(-1, -1, 1, 1), 0.25)
    st = DirectionStencil.build(3)
    for _ in range(10):
        A = rng.normal(size=(2, 2))
        H = A + A.T
        v = _sample(
            lat,
            lambda x, y: 0.5 * (H[0, 0] * x * x + 2 * H[0, 1] * x * y + H[1, 1] * y * y),
        )
        k = int(rng.integers(lat.n_interior))
        for e in st.directions:
            d = second_difference(v, k, e)
            if d is None:
                continue
            ev = np.array(e, dtype=float)
            want = ev @ H @ ev / (ev @ ev)
            if abs(d - want) > 1e-9 * max(1.0, abs(want)):
                return False, f"direction {e}: {d} vs {want}"
    return True, ""


def _suite_lambda1_monotone(seed):
    rng = np.random.default_rng(seed)
    lat = build_lattice(Box(0, 0, 1, 1), 0.2)
    st = DirectionStencil.build(2)
    for _ in range(300):
        v = MeshFunction(lat, rng.normal(size=lat.n_nodes))
        k = int(rng.integers(lat.n_interior))
        base = lambda1_h(v, k, st)
        other = int(rng.integers(lat.n_nodes))
        if other == k:
            continue
        v.values[other] += float(rng.uniform(0, 2))
        if lambda1_h(v, k, st) < base - 1e-12:
            return False, f"lambda1 dropped at node {k}"
    return True, ""


def _suite_scheme_monotone(seed):
    ok, counterexample = scheme.monotonicity_test(trials=1000, seed=seed)
    return ok, "" if ok else str(counterexample)


def _suite_consistency(seed):
    lat = build_lattice(Box(-1, -1, 1, 1), 0.25)
    st = DirectionStencil.build(2)
    errs = scheme.consistency_test(lat, st, [np.eye(2), np.diag([1.0, 4.0])])
    if max(errs) > 1e-10:
        return False, f"aligned quadratics not exact: {errs}"
    return True, ""


def _suite_subdifferential_oracle(seed):
    rng = np.random.default_rng(seed)
    for _ in range(4):
        n = int(rng.integers(4, 7))
        lat = build_lattice(Box(0, 0, 1, 1), 1.0 / n)
        v = _random_convex(lat, rng)
        for k in range(lat.n_interior):
            poly = measure.subdifferential(v, k, check_convex=False)
            # vertex enumeration oracle
            x0 = lat.coords[k]
            keep = np.ones(lat.n_nodes, dtype=bool)
            keep[k] = False
            normals = (lat.coords - x0)[keep]
            offsets = (v.values - v.values[k])[keep]
            pts = []
            m = len(normals)
            for i in range(m):
                for j in range(i + 1, m):
                    A = np.array([normals[i], normals[j]])
                    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
                    if abs(det) < 1e-12:
                        continue
                    p = np.linalg.solve(A, np.array([offsets[i], offsets[j]]))
                    if np.all(normals @ p <= offsets + 1e-9 * (1 + np.abs(offsets).max())):
                        pts.append(p)
            if len(pts) < 3:
                oracle = 0.0
            else:
                pts = np.array(pts)
                center = pts.mean(axis=0)
                order = np.argsort(np.arctan2(pts[:, 1] - center[1], pts[:, 0] - center[0]))
                pts = pts[order]
                x, y = pts[:, 0], pts[:, 1]
                oracle = abs(
                    0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
                )
            if abs(poly.area - oracle) > 1e-9:
                return False, f"node {k}: clip {poly.area} vs oracle {oracle}"
    return True, ""


def _suite_maximum_principles(seed):
    rng = np.random.default_rng(seed)
    lat = build_lattice(Box(0, 0, 1, 1), 0.125)
    for _ in range(20):
        amp = float(rng.uniform(0.1, 2.0))
        cx, cy = rng.uniform(0.2, 0.8, size=2)
        v = _sample(lat, lambda x, y: amp * ((x - cx) ** 2 + (y - cy) ** 2))
        w = principle.harmonic_solve(lat, lambda p, vals=v.boundary_values: vals)
        z = MeshFunction(lat, v.values - w.values)
        ok, vmax, node = principle.laplace_max_principle_check(z)
        if not ok:
            return False, f"max principle violated: {vmax} at {node}"
        ok, viol = principle.barrier_compare(v, w, tol=1e-10)
        if not ok:
            return False, f"barrier violated by {viol}"
    return True, ""


def _suite_envelope(seed):
    env = scheme.ConvexEnvelope(
        Box(0, 0, 1, 1), lambda p: 0.1 + 0.5 * p[:, 0] - 0.25 * p[:, 1], 24
    )
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 1, size=(40, 2))
    want = 0.1 + 0.5 * pts[:, 0] - 0.25 * pts[:, 1]
    if np.abs(env(pts) - want).max() > 1e-9:
        return False, "affine envelope not reproduced"
    return True, ""


SUITES = [
    ("lattice-invariants", _suite_lattice),
    ("quadratic-exactness", _suite_quadratic_exactness),
    ("lambda1-monotone", _suite_lambda1_monotone),
    ("scheme-monotone", _suite_scheme_monotone),
    ("scheme-consistency", _suite_consistency),
    ("subdifferential-oracle", _suite_subdifferential_oracle),
    ("maximum-principles", _suite_maximum_principles),
    ("convex-envelope", _suite_envelope),
]


def run_selftest(seed=0, out=print):
    all_ok = True
    for name, fn in SUITES:
        try:
            ok, detail = fn(seed)
        except Exception as exc:  # noqa: BLE001 - report, do not crash the runner
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        all_ok &= ok
        status = "PASS" if ok else "FAIL"
        out(f"{status} {name}" + (f": {detail}" if detail else ""))
    out(("OK" if all_ok else "FAILED") + f" ({len(SUITES)} suites)")
    return all_ok
