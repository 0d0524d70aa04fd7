"""Flat dotted-key config files and the run configuration.

Config files hold one ``key = value`` pair per line with ``#`` comments.
Values parse as JSON where possible (numbers, lists, booleans); anything
else is kept as a bare string, so ``domain.kind = box`` needs no quoting.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .domain import domain_from_config
from .expressions import compile_expression
from .scheme import InputError, MAProblem, SchemeConfig

__all__ = ["ConfigError", "parse_config_text", "load_config", "RunConfig"]


class ConfigError(ValueError):
    pass


def parse_config_text(text):
    """Parse flat ``key = value`` lines into a dict."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def load_config(path):
    with open(path) as fh:
        return parse_config_text(fh.read())


# built-in problems; expressions keep them config-representable
_BUILTIN_PROBLEMS = {
    "quadratic": {
        "f": "1",
        "g": "(x*x + y*y) / 2",
        "exact": "(x*x + y*y) / 2",
    },
    "exp": {
        "f": "(1 + x*x + y*y) * exp(x*x + y*y)",
        "g": "exp((x*x + y*y) / 2)",
        "exact": "exp((x*x + y*y) / 2)",
    },
    "affine": {
        "f": "0",
        "g": "1 + 2*x - y",
        "exact": "1 + 2*x - y",
    },
}


@dataclass
class RunConfig:
    """Everything a study run needs, parsed from a flat config dict."""

    domain: object
    problem: MAProblem
    h_values: list
    delta: float
    scheme: SchemeConfig
    output_dir: str
    seed: int
    boundary_samples: int = 64
    minorant: tuple | None = None  # (a1, a2, b) affine minorant for the ABP probe
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, cfg):
        try:
            domain = domain_from_config(cfg)
        except Exception as exc:
            raise ConfigError(str(exc)) from None

        name = cfg.get("problem.name")
        entries = dict(_BUILTIN_PROBLEMS.get(name, {})) if name else {}
        if name and not entries:
            raise ConfigError(
                f"unknown problem.name {name!r}; built-ins: "
                f"{sorted(_BUILTIN_PROBLEMS)}"
            )
        for key in ("f", "g", "exact"):
            if f"problem.{key}" in cfg:
                entries[key] = str(cfg[f"problem.{key}"])
        if "f" not in entries or "g" not in entries:
            raise ConfigError("problem needs problem.name or problem.f and problem.g")
        try:
            f = compile_expression(entries["f"])
            g = compile_expression(entries["g"])
            exact = compile_expression(entries["exact"]) if entries.get("exact") else None
        except Exception as exc:
            raise ConfigError(f"bad problem expression: {exc}") from None
        problem = MAProblem(
            domain=domain, f=f, g=g, exact=exact, name=name or "custom"
        )

        h_values = cfg.get("study.h", [0.125, 0.0625])
        if isinstance(h_values, (int, float)):
            h_values = [h_values]
        h_values = [float(h) for h in h_values]
        if any(h <= 0 for h in h_values) or any(
            h_values[i + 1] >= h_values[i] for i in range(len(h_values) - 1)
        ):
            raise ConfigError("study.h must be a strictly decreasing list of positive h")

        delta = cfg.get("study.delta")
        delta = 0.2 * domain.diameter() if delta is None else float(delta)
        if delta <= 0:
            raise ConfigError("study.delta must be positive")
        from .harness import compact_inset_box

        try:
            compact_inset_box(domain, delta)
        except ValueError as exc:
            raise ConfigError(f"study.delta leaves no compact set: {exc}") from None

        try:
            scheme = SchemeConfig(
                stencil_width=int(cfg.get("scheme.stencil_width", 2)),
                solver=str(cfg.get("scheme.solver", "gauss_seidel_bisection")),
                dt=cfg.get("scheme.dt"),
                tol_residual=float(cfg.get("scheme.tol_residual", 1e-8)),
                max_iters=int(cfg.get("scheme.max_iters", 50_000)),
                init=str(cfg.get("scheme.init", "harmonic")),
            )
        except InputError as exc:
            raise ConfigError(str(exc)) from None

        minorant = cfg.get("problem.minorant")
        if minorant is not None:
            minorant = tuple(float(t) for t in minorant)
            if len(minorant) != 3:
                raise ConfigError("problem.minorant must be [a1, a2, b]")

        return cls(
            domain=domain,
            problem=problem,
            h_values=h_values,
            delta=delta,
            scheme=scheme,
            output_dir=str(cfg.get("output.dir", "out")),
            seed=int(cfg.get("seed", 0)),
            boundary_samples=int(cfg.get("study.boundary_samples", 64)),
            minorant=minorant,
            raw=dict(cfg),
        )

    @classmethod
    def from_file(cls, path):
        return cls.from_dict(load_config(path))
