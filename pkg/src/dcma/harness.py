"""Experiment orchestration: refinement studies and boundary probes.

A refinement study solves the configured problem on a decreasing list of
mesh lengths and records, per level: interpolant sup errors on a compact
inset box, node errors near the boundary, Monge-Ampere masses, Lipschitz
moduli, the harmonic-barrier comparison and the ABP check.  Results land in
``table.csv`` and ``report.json`` (written atomically).

The boundary adherence probe samples shells at distances h, 2h, 4h from the
boundary and fits the decay exponent of the envelope deficit
``max(0, U - I(u_h))``; the convexity probe samples midpoint convexity of
the interpolant along random segments.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np

from . import interp, principle, scheme
from .domain import build_lattice
from .meshfn import MeshFunction

__all__ = [
    "StudyRecord",
    "StudyReport",
    "run_refinement_study",
    "boundary_adherence_probe",
    "convexity_of_limit_probe",
    "compact_inset_box",
    "atomic_write_text",
]

TABLE_COLUMNS = [
    "h",
    "sup_err_K",
    "sup_err_all",
    "shell_err",
    "ma_mass",
    "lipschitz_K",
    "sup_norm",
    "iters",
    "seconds",
    "order",
]

# masses growing faster than this between consecutive levels (h <= 1/16)
# violate the uniform-mass hypothesis empirically
MASS_GROWTH_LIMIT = 1.25


def atomic_write_text(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def compact_inset_box(domain, delta):
    """An axis box inside {x : d(x, boundary) >= delta}, as large as the
    domain shape allows."""
    xmin, ymin, xmax, ymax = domain.bounding_box()
    box = [xmin + delta, ymin + delta, xmax - delta, ymax - delta]
    if box[0] >= box[2] or box[1] >= box[3]:
        raise ValueError(f"delta={delta} leaves no compact inset box")
    if domain.kind == "disk":
        half = (domain.radius - delta) / math.sqrt(2.0)
        if half <= 0:
            raise ValueError(f"delta={delta} leaves no compact inset box")
        return (domain.cx - half, domain.cy - half, domain.cx + half, domain.cy + half)
    if domain.kind == "box":
        return tuple(box)
    # polygon: shrink the inset bbox toward its center until all corners
    # keep distance delta
    cx, cy = 0.5 * (box[0] + box[2]), 0.5 * (box[1] + box[3])
    for _ in range(60):
        corners = [(box[0], box[1]), (box[2], box[1]), (box[2], box[3]), (box[0], box[3])]
        ok = all(
            domain.classify(x, y) == "interior" and domain.distance_to_boundary(x, y) >= delta * (1 - 1e-9)
            for x, y in corners
        )
        if ok:
            return tuple(box)
        box = [
            cx + 0.9 * (box[0] - cx),
            cy + 0.9 * (box[1] - cy),
            cx + 0.9 * (box[2] - cx),
            cy + 0.9 * (box[3] - cy),
        ]
    raise ValueError(f"could not fit a compact inset box at delta={delta}")


@dataclass
class StudyRecord:
    h: float
    n_interior: int = 0
    sup_err_K: float | None = None
    sup_err_all: float | None = None
    shell_err: float | None = None
    ma_mass: float | None = None
    lipschitz_K: float | None = None
    sup_norm: float | None = None
    iters: int | None = None
    seconds: float | None = None
    order: float | None = None
    residual_final: float | None = None
    min_lambda1: float | None = None
    discrete_convex: bool | None = None
    barrier_ok: bool | None = None
    barrier_violation: float | None = None
    abp_empirical: float | None = None
    abp_pass: bool | None = None
    error: str | None = None

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class StudyReport:
    records: list
    passed: bool
    failures: list = field(default_factory=list)
    solutions: dict = field(default_factory=dict, repr=False)  # h -> MeshFunction

    def record_for(self, h):
        for r in self.records:
            if r.h == h:
                return r
        raise KeyError(h)

    def to_json_dict(self, config_echo=None):
        return {
            "config": config_echo or {},
            "passed": self.passed,
            "failures": self.failures,
            "records": [r.to_dict() for r in self.records],
        }


def _csv_cell(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_table_csv(path, records):
    lines = [",".join(TABLE_COLUMNS)]
    for r in records:
        row = [
            r.h,
            r.sup_err_K,
            r.sup_err_all,
            r.shell_err,
            r.ma_mass,
            r.lipschitz_K,
            r.sup_norm,
            r.iters,
            r.seconds,
            r.order,
        ]
        lines.append(",".join(_csv_cell(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def run_refinement_study(run_config, keep_solutions=True, write_outputs=True):
    """Solve the configured problem across the h list and collect the
    per-level records; failures at one level are recorded and the study
    continues with the remaining levels."""
    cfg = run_config
    problem = cfg.problem
    domain = cfg.domain
    exact = problem.exact
    K_box = compact_inset_box(domain, cfg.delta)
    abp_constant = float(cfg.raw.get("abp.constant", 5.0))

    records = []
    failures = []
    solutions = {}
    for h in cfg.h_values:
        rec = StudyRecord(h=h)
        records.append(rec)
        t0 = time.perf_counter()
        try:
            lattice = build_lattice(domain, h)
            rec.n_interior = lattice.n_interior
            u, solve_report = scheme.solve(problem, lattice, cfg.scheme)
            rec.iters = solve_report.iterations
            rec.residual_final = solve_report.residual_history[-1]
            rec.sup_norm = solve_report.sup_norm
            rec.ma_mass = solve_report.ma_total_mass
            rec.min_lambda1 = solve_report.min_lambda1
            rec.discrete_convex = solve_report.discrete_convex
            if keep_solutions:
                solutions[h] = u

            if exact is not None:
                rec.sup_err_all = float(
                    np.abs(u.values - np.asarray(exact(lattice.coords))).max()
                )
                rec.sup_err_K = interp.sup_error_on_compact(
                    u, exact, K_box, _density_for(K_box, h)
                )
                dists = lattice.interior_distances_to_boundary()
                shell = dists <= 2.0 * h
                if shell.any():
                    rec.shell_err = float(
                        np.abs(
                            u.interior_values[shell]
                            - np.asarray(exact(lattice.interior_coords[shell]))
                        ).max()
                    )
            rec.lipschitz_K = interp.lipschitz_modulus(u, K_box)

            w = principle.harmonic_solve(lattice, problem.g)
            ok, viol = principle.barrier_compare(u, w)
            rec.barrier_ok = bool(ok)
            rec.barrier_violation = viol
            if not ok:
                failures.append(f"h={h}: barrier comparison violated by {viol:.3e}")

            z = _abp_input(u, cfg.minorant)
            abp = principle.abp_check(z, abp_constant)
            rec.abp_empirical = abp.empirical_constant
            rec.abp_pass = abp.passed
            if not abp.passed:
                failures.append(
                    f"h={h}: ABP constant {abp.empirical_constant:.3f} above "
                    f"{abp_constant}"
                )
        except Exception as exc:  # noqa: BLE001 - study keeps going per level
            rec.error = f"{type(exc).__name__}: {exc}"
            failures.append(f"h={h}: {rec.error}")
        rec.seconds = time.perf_counter() - t0

    _fill_orders(records, cfg.scheme.tol_residual)
    _check_mass_growth(records, failures)

    report = StudyReport(
        records=records, passed=not failures, failures=failures, solutions=solutions
    )
    if write_outputs:
        out = cfg.output_dir
        write_table_csv(os.path.join(out, "table.csv"), records)
        atomic_write_text(
            os.path.join(out, "report.json"),
            json.dumps(report.to_json_dict(_config_echo(cfg)), indent=2, sort_keys=True)
            + "\n",
        )
    return report


def _density_for(K_box, h):
    width = max(K_box[2] - K_box[0], K_box[3] - K_box[1])
    return int(min(241, max(33, 2 * math.ceil(width / h) + 1)))


def _abp_input(u, minorant):
    """u minus an affine minorant of its boundary data (the constant
    boundary minimum by default)."""
    lattice = u.lattice
    if minorant is None:
        b = float(u.boundary_values.min())
        vals = u.values - b
    else:
        a1, a2, c = minorant
        vals = u.values - (a1 * lattice.coords[:, 0] + a2 * lattice.coords[:, 1] + c)
    return MeshFunction(lattice, vals)


def _fill_orders(records, tol_residual):
    floor = 10.0 * tol_residual
    for prev, cur in zip(records, records[1:]):
        if prev.error or cur.error or prev.sup_err_K is None or cur.sup_err_K is None:
            continue
        ratio = prev.h / cur.h
        if abs(ratio - 2.0) > 1e-9:
            continue
        if prev.sup_err_K > floor and cur.sup_err_K > floor:
            cur.order = float(np.log2(prev.sup_err_K / cur.sup_err_K))


def _check_mass_growth(records, failures):
    for prev, cur in zip(records, records[1:]):
        if prev.error or cur.error or prev.ma_mass is None or cur.ma_mass is None:
            continue
        if cur.h <= 1.0 / 16.0 + 1e-12 and prev.ma_mass > 0:
            growth = cur.ma_mass / prev.ma_mass
            if growth > MASS_GROWTH_LIMIT:
                failures.append(
                    f"MA mass grew {growth:.2f}x from h={prev.h} to h={cur.h} "
                    f"(limit {MASS_GROWTH_LIMIT})"
                )


def _config_echo(cfg):
    echo = {k: v for k, v in cfg.raw.items()}
    echo.setdefault("seed", cfg.seed)
    return echo


# ---------------------------------------------------------------------------
# probes


def boundary_adherence_probe(
    solutions,
    g,
    domain,
    exact=None,
    boundary_samples=256,
    envelope_samples=64,
    deficit_floor=1e-7,
):
    """Shell diagnostics near the boundary for solutions keyed by h.

    For shells at distances h, 2h, 4h: the envelope deficit
    ``max(0, U - I(u_h))``, the excess over the harmonic barrier
    ``max(0, I(u_h) - I(w_h))``, and (with ``exact``) the shell sup error.
    Returns (rows, alphas) where alphas fit ``deficit ~ C dist^alpha`` per h.
    """
    envelope = scheme.ConvexEnvelope(domain, g, envelope_samples)
    zeta, normals = domain.boundary_points(boundary_samples)
    rows = []
    alphas = {}
    for h in sorted(solutions, reverse=True):
        u = solutions[h]
        plf = interp.interpolate(u)
        w = principle.harmonic_solve(u.lattice, g)
        wplf = interp.interpolate(w)
        dists = []
        deficits = []
        for mult in (1.0, 2.0, 4.0):
            dist = mult * h
            pts = zeta + dist * normals  # normals point inward
            keep = []
            for p in pts:
                if domain.classify(p[0], p[1]) != "interior":
                    continue
                if abs(domain.distance_to_boundary(p[0], p[1]) - dist) > 0.3 * dist:
                    continue
                keep.append(p)
            if not keep:
                continue
            keep = np.array(keep)
            vals = plf(keep, outside="nan")
            wvals = wplf(keep, outside="nan")
            good = np.isfinite(vals) & np.isfinite(wvals)
            if not good.any():
                continue
            keep, vals, wvals = keep[good], vals[good], wvals[good]
            deficit = float(np.maximum(envelope(keep) - vals, 0.0).max())
            excess = float(np.maximum(vals - wvals, 0.0).max())
            row = {
                "h": h,
                "dist": dist,
                "samples": int(good.sum()),
                "deficit": deficit,
                "excess": excess,
            }
            if exact is not None:
                row["shell_sup_err"] = float(
                    np.abs(vals - np.asarray(exact(keep))).max()
                )
            rows.append(row)
            if deficit > deficit_floor:
                dists.append(dist)
                deficits.append(deficit)
        if len(dists) >= 2:
            slope = np.polyfit(np.log(dists), np.log(deficits), 1)[0]
            alphas[h] = float(slope)
        else:
            alphas[h] = None
    return rows, alphas


def convexity_of_limit_probe(solutions, K_box, n_segments=200, seed=0):
    """Midpoint-convexity violations of the interpolant on random segments
    inside the box, per h.  Violations should shrink as h decreases."""
    rng = np.random.default_rng(seed)
    xmin, ymin, xmax, ymax = K_box
    a = rng.uniform([xmin, ymin], [xmax, ymax], size=(n_segments, 2))
    b = rng.uniform([xmin, ymin], [xmax, ymax], size=(n_segments, 2))
    t = rng.uniform(size=n_segments)
    out = {}
    for h in sorted(solutions, reverse=True):
        plf = interp.interpolate(solutions[h])
        mid = a * t[:, None] + b * (1 - t[:, None])
        viol = plf(mid) - (t * plf(a) + (1 - t) * plf(b))
        out[h] = {
            "max_violation": float(np.maximum(viol, 0.0).max()),
            "allowance": float(h),
        }
    return out
