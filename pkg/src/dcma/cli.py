"""Command line interface.

Subcommands: ``solve``, ``measure``, ``check-abp``, ``envelope``,
``refine-study``, ``selftest``.  Exit codes: 0 success, 1 a check failed,
2 input error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import harness, measure, principle, scheme
from .config import ConfigError, RunConfig
from .domain import DomainError, LatticeError, build_lattice
from .harness import atomic_write_text
from .meshfn import MeshFunction
from .scheme import InputError

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT_ERROR = 2


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="dcma",
        description=(
            "Discrete convex mesh functions, Monge-Ampere measures and a "
            "monotone wide-stencil solver on uniform 2D lattices."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=name != "selftest", help="config file path")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        return p

    add("solve", "solve the configured problem at the first mesh length")
    add("measure", "Monge-Ampere measure of the sampled exact solution")
    add("check-abp", "solve, subtract the affine minorant and run the ABP check")
    add("envelope", "dump the convex envelope of the boundary data on a grid")
    add("refine-study", "run the refinement study across the h list")
    p = sub.add_parser("selftest", help="run the built-in property suites")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", default=None, help=argparse.SUPPRESS)
    p.add_argument("--out", default=None, help=argparse.SUPPRESS)
    return parser


def _load_run_config(args):
    cfg = RunConfig.from_file(args.config)
    if args.out is not None:
        cfg.output_dir = args.out
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _cmd_solve(cfg):
    h = cfg.h_values[0]
    lattice = build_lattice(cfg.domain, h)
    u, report = scheme.solve(cfg.problem, lattice, cfg.scheme)
    os.makedirs(cfg.output_dir, exist_ok=True)
    u.to_csv(os.path.join(cfg.output_dir, "solution.csv"))
    atomic_write_text(
        os.path.join(cfg.output_dir, "report.json"),
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
    )
    print(
        f"solved h={h}: iterations={report.iterations} "
        f"residual={report.residual_history[-1]:.3e} mass={report.ma_total_mass:.6f}"
    )
    return EXIT_OK


def _cmd_measure(cfg):
    if cfg.problem.exact is None:
        print("measure requires problem.exact (or a built-in problem)", file=sys.stderr)
        return EXIT_INPUT_ERROR
    h = cfg.h_values[0]
    lattice = build_lattice(cfg.domain, h)
    v = MeshFunction.from_callable(lattice, cfg.problem.exact)
    m = measure.ma_measure(v)
    os.makedirs(cfg.output_dir, exist_ok=True)
    lines = ["x,y,mass"]
    for k in range(lattice.n_interior):
        x, y = lattice.interior_coords[k]
        lines.append(f"{float(x)!r},{float(y)!r},{float(m.node_masses[k])!r}")
    atomic_write_text(os.path.join(cfg.output_dir, "mass.csv"), "\n".join(lines) + "\n")
    atomic_write_text(
        os.path.join(cfg.output_dir, "mass.json"),
        json.dumps({"h": h, "total_mass": m.total}, indent=2, sort_keys=True) + "\n",
    )
    print(f"h={h}: total MA mass {m.total!r}")
    return EXIT_OK


def _cmd_check_abp(cfg):
    h = cfg.h_values[0]
    lattice = build_lattice(cfg.domain, h)
    u, _ = scheme.solve(cfg.problem, lattice, cfg.scheme)
    z = harness._abp_input(u, cfg.minorant)
    constant = float(cfg.raw.get("abp.constant", 5.0))
    rep = principle.abp_check(z, constant)
    os.makedirs(cfg.output_dir, exist_ok=True)
    lines = ["x,y,z,dist,bound_core,ratio"]
    for (x, y), zv, dist, core, ratio in rep.rows:
        lines.append(
            f"{float(x)!r},{float(y)!r},{float(zv)!r},{float(dist)!r},"
            f"{float(core)!r},{float(ratio)!r}"
        )
    atomic_write_text(os.path.join(cfg.output_dir, "abp.csv"), "\n".join(lines) + "\n")
    atomic_write_text(
        os.path.join(cfg.output_dir, "abp.json"),
        json.dumps(
            {
                "h": h,
                "empirical_constant": rep.empirical_constant,
                "configured_constant": rep.configured_constant,
                "passed": rep.passed,
                "total_mass": rep.total_mass,
                "negative_nodes": len(rep.rows),
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
    )
    print(
        f"h={h}: empirical ABP constant {rep.empirical_constant:.6f} "
        f"(limit {constant}) -> {'pass' if rep.passed else 'FAIL'}"
    )
    return EXIT_OK if rep.passed else EXIT_CHECK_FAILED


def _cmd_envelope(cfg):
    env = scheme.ConvexEnvelope(cfg.domain, cfg.problem.g, cfg.boundary_samples)
    xmin, ymin, xmax, ymax = cfg.domain.bounding_box()
    n = 65
    xs = np.linspace(xmin, xmax, n)
    ys = np.linspace(ymin, ymax, n)
    lines = ["x,y,value"]
    for y in ys:
        pts = np.stack([xs, np.full_like(xs, y)], axis=1)
        vals = env(pts)
        for x, v in zip(xs, vals):
            lines.append(f"{float(x)!r},{float(y)!r},{float(v)!r}")
    os.makedirs(cfg.output_dir, exist_ok=True)
    atomic_write_text(os.path.join(cfg.output_dir, "envelope.csv"), "\n".join(lines) + "\n")
    print(f"envelope sampled on a {n}x{n} grid -> {cfg.output_dir}/envelope.csv")
    return EXIT_OK


def _cmd_refine_study(cfg):
    report = harness.run_refinement_study(cfg)
    for rec in report.records:
        err = "" if rec.sup_err_K is None else f" errK={rec.sup_err_K:.3e}"
        mass = "" if rec.ma_mass is None else f" mass={rec.ma_mass:.4f}"
        status = f" ERROR: {rec.error}" if rec.error else ""
        print(f"h={rec.h}: iters={rec.iters}{err}{mass}{status}")
    if not report.passed:
        for failure in report.failures:
            print(f"FAIL {failure}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    print(f"study passed; outputs in {cfg.output_dir}")
    return EXIT_OK


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code) if exc.code else EXIT_OK

    if args.command == "selftest":
        from .selftest import run_selftest

        return EXIT_OK if run_selftest(seed=args.seed) else EXIT_CHECK_FAILED

    try:
        cfg = _load_run_config(args)
        if args.command == "solve":
            return _cmd_solve(cfg)
        if args.command == "measure":
            return _cmd_measure(cfg)
        if args.command == "check-abp":
            return _cmd_check_abp(cfg)
        if args.command == "envelope":
            return _cmd_envelope(cfg)
        if args.command == "refine-study":
            return _cmd_refine_study(cfg)
    except (ConfigError, InputError, DomainError, LatticeError, FileNotFoundError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    return EXIT_INPUT_ERROR


# exit-code-returning entry point, also usable programmatically
cli_main = main


if __name__ == "__main__":
    sys.exit(main())
