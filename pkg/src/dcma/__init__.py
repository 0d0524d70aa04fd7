"""Discrete convex mesh functions and Monge-Ampere tools on uniform lattices.

Submodules
----------
domain     convex domains (box, polygon, disk) and lattice construction
meshfn     mesh functions and discrete differential operators
interp     piecewise-linear interpolation on the lattice triangulation
measure    discrete subdifferential polytopes and Monge-Ampere measures
principle  discrete maximum principles and the harmonic barrier
scheme     the monotone wide-stencil Monge-Ampere scheme and solvers
harness    configuration, refinement studies and the command line interface
"""

from .domain import Box, ConvexPolygon, Disk, Lattice, build_lattice
from .interp import interpolate, lipschitz_modulus, sup_error_on_compact
from .measure import ma_measure, subdifferential
from .meshfn import (
    DirectionStencil,
    MeshFunction,
    discrete_laplacian,
    is_discrete_convex,
    lambda1_h,
    second_difference,
)
from .principle import abp_check, barrier_compare, harmonic_solve
from .scheme import MAProblem, SchemeConfig, convex_envelope, ma_operator, solve

__version__ = "0.1.0"

__all__ = [
    "Box",
    "ConvexPolygon",
    "Disk",
    "Lattice",
    "build_lattice",
    "DirectionStencil",
    "MeshFunction",
    "second_difference",
    "lambda1_h",
    "is_discrete_convex",
    "discrete_laplacian",
    "interpolate",
    "lipschitz_modulus",
    "sup_error_on_compact",
    "subdifferential",
    "ma_measure",
    "abp_check",
    "barrier_compare",
    "harmonic_solve",
    "MAProblem",
    "SchemeConfig",
    "solve",
    "ma_operator",
    "convex_envelope",
    "__version__",
]
