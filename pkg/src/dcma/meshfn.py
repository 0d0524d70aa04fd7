"""Mesh functions and discrete differential operators on lattices.

Central second differences along integer directions, the minimal directional
second difference (a discrete smallest-curvature proxy), the discrete
convexity predicate, and the discrete Laplacian.  Near a projected boundary,
axis operators use the non-symmetric three-point formula with unequal arms;
wide directions are only evaluated when both endpoints fall exactly on nodes
(exact-step policy).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import Lattice, LatticeError

__all__ = [
    "MeshFunction",
    "DirectionStencil",
    "ConvexityReport",
    "second_difference",
    "second_difference_clipped",
    "lambda1_h",
    "is_discrete_convex",
    "discrete_laplacian",
]

# Default tolerance for the convexity predicate, relative to the value scale.
TOL_CONVEX = 1e-10


@dataclass
class MeshFunction:
    """Real values on the nodes of a lattice, interior first."""

    lattice: Lattice
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.lattice.n_nodes,):
            raise ValueError(
                f"value count {self.values.shape} does not match the "
                f"{self.lattice.n_nodes} lattice nodes"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("mesh function values must be finite")

    @classmethod
    def from_callable(cls, lattice, fn):
        """Sample ``fn(points)`` (points of shape (n, 2)) on all nodes."""
        return cls(lattice, np.asarray(fn(lattice.coords), dtype=float))

    @property
    def interior_values(self):
        return self.values[: self.lattice.n_interior]

    @property
    def boundary_values(self):
        return self.values[self.lattice.n_interior :]

    def oscillation(self):
        return float(self.values.max() - self.values.min())

    def copy(self):
        return MeshFunction(self.lattice, self.values.copy())

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("x,y,value\n")
            for k in range(self.lattice.n_nodes):
                x, y = self.lattice.coords[k]
                fh.write(f"{float(x)!r},{float(y)!r},{float(self.values[k])!r}\n")

    @classmethod
    def from_csv(cls, lattice, path):
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        if data.shape[0] != lattice.n_nodes:
            raise ValueError("row count does not match the lattice")
        if not np.allclose(data[:, :2], lattice.coords, atol=1e-9 * lattice.h):
            raise ValueError("node coordinates do not match the lattice")
        return cls(lattice, data[:, 2])


def _coprime(a, b):
    return math.gcd(abs(a), abs(b)) == 1


def _canonical(e):
    """One representative per antipodal pair: first nonzero component > 0."""
    a, b = e
    if a < 0 or (a == 0 and b < 0):
        return (-a, -b)
    return (a, b)


@dataclass(frozen=True)
class DirectionStencil:
    """Coprime integer directions with max-norm <= width, one per antipodal
    pair, plus the orthogonal pairs (e, e_perp) used by the MA operator."""

    width: int
    directions: tuple
    pairs: tuple  # pairs of indices into ``directions``

    @classmethod
    def build(cls, width=2):
        if width < 1:
            raise ValueError("stencil width must be >= 1")
        dirs = []
        for a in range(-width, width + 1):
            for b in range(-width, width + 1):
                if (a, b) == (0, 0) or not _coprime(a, b):
                    continue
                c = _canonical((a, b))
                if c not in dirs:
                    dirs.append(c)
        dirs.sort(key=lambda e: (max(abs(e[0]), abs(e[1])), math.atan2(e[1], e[0])))
        index = {e: i for i, e in enumerate(dirs)}
        pairs = []
        for i, e in enumerate(dirs):
            perp = _canonical((-e[1], e[0]))
            j = index[perp]
            if i < j:
                pairs.append((i, j))
        return cls(width=width, directions=tuple(dirs), pairs=tuple(pairs))

    @property
    def axis_pair(self):
        return (self.directions.index((1, 0)), self.directions.index((0, 1)))

    def non_axis_pairs(self):
        ax = set(self.axis_pair)
        return tuple(p for p in self.pairs if not set(p) & ax)


def second_difference(v, k, e):
    """Central second difference of v at interior node k along direction e,
    normalized by h^2 |e|^2.  Returns None when an endpoint is not a node
    (direction unavailable); callers skip unavailable directions."""
    lat = v.lattice
    tbl = lat.direction_table(e)
    ip, im = tbl[k]
    if ip < 0 or im < 0:
        return None
    h2e2 = lat.h**2 * float(e[0] ** 2 + e[1] ** 2)
    return (v.values[ip] - 2.0 * v.values[k] + v.values[im]) / h2e2


def second_difference_clipped(v, k, axis):
    """Axis second difference with unequal arms near a projected boundary.

    Uses the standard non-symmetric three-point formula
    ``2[(v(x+a e) - v(x))/a + (v(x-b e) - v(x))/b]/(a+b)``, which reduces to
    the central formula when both arms equal h.
    """
    lat = v.lattice
    d_plus, d_minus = (0, 1) if axis == 0 else (2, 3)
    ip = lat.axis_neighbor_ids[k, d_plus]
    im = lat.axis_neighbor_ids[k, d_minus]
    a = lat.axis_arms[k, d_plus]
    b = lat.axis_arms[k, d_minus]
    v0 = v.values[k]
    return 2.0 * ((v.values[ip] - v0) / a + (v.values[im] - v0) / b) / (a + b)


def _delta_all(v, e):
    """Vectorized second difference along e for all interior nodes.

    Returns (values, available) with NaN where unavailable.
    """
    lat = v.lattice
    tbl = lat.direction_table(e)
    avail = (tbl[:, 0] >= 0) & (tbl[:, 1] >= 0)
    out = np.full(lat.n_interior, np.nan)
    h2e2 = lat.h**2 * float(e[0] ** 2 + e[1] ** 2)
    vals = v.values
    idx = np.nonzero(avail)[0]
    out[idx] = (
        vals[tbl[idx, 0]] - 2.0 * vals[idx] + vals[tbl[idx, 1]]
    ) / h2e2
    return out, avail


def _clipped_axis_all(v, axis):
    lat = v.lattice
    d_plus, d_minus = (0, 1) if axis == 0 else (2, 3)
    ip = lat.axis_neighbor_ids[:, d_plus]
    im = lat.axis_neighbor_ids[:, d_minus]
    a = lat.axis_arms[:, d_plus]
    b = lat.axis_arms[:, d_minus]
    v0 = v.interior_values
    return 2.0 * ((v.values[ip] - v0) / a + (v.values[im] - v0) / b) / (a + b)


def lambda1_all(v, stencil=None, include_clipped_axes=True):
    """Minimal directional second difference at every interior node.

    The minimum runs over the stencil directions available under the
    exact-step policy; with ``include_clipped_axes`` the unequal-arm axis
    differences participate as well, so the result is defined at every
    interior node of a projected lattice.
    """
    if stencil is None:
        stencil = DirectionStencil.build()
    lat = v.lattice
    best = np.full(lat.n_interior, np.inf)
    any_avail = np.zeros(lat.n_interior, dtype=bool)
    for e in stencil.directions:
        vals, avail = _delta_all(v, e)
        np.fmin(best, np.where(avail, vals, np.inf), out=best)
        any_avail |= avail
    if include_clipped_axes:
        for axis in (0, 1):
            np.fmin(best, _clipped_axis_all(v, axis), out=best)
        any_avail[:] = True
    if not any_avail.all():
        k = int(np.nonzero(~any_avail)[0][0])
        raise LatticeError(
            f"no stencil direction available at interior node {tuple(lat.coords[k])}"
        )
    return best


def lambda1_h(v, k, stencil=None, include_clipped_axes=True):
    """Minimal directional second difference at interior node k."""
    if stencil is None:
        stencil = DirectionStencil.build()
    best = math.inf
    for e in stencil.directions:
        d = second_difference(v, k, e)
        if d is not None:
            best = min(best, d)
    if include_clipped_axes:
        best = min(best, second_difference_clipped(v, k, 0))
        best = min(best, second_difference_clipped(v, k, 1))
    if not math.isfinite(best):
        raise LatticeError(
            f"no stencil direction available at interior node {tuple(v.lattice.coords[k])}"
        )
    return best


@dataclass
class ConvexityReport:
    ok: bool
    min_value: float
    witness_node: tuple | None = None
    witness_direction: tuple | None = None

    def __bool__(self):
        return self.ok


def is_discrete_convex(v, stencil=None, tol=None):
    """Check ``lambda1 >= -tol`` at every interior node.

    Returns a report carrying the worst value and, on failure, the witness
    node and direction.  The default tolerance is TOL_CONVEX scaled by the
    oscillation of v.
    """
    if stencil is None:
        stencil = DirectionStencil.build()
    if tol is None:
        tol = TOL_CONVEX * max(1.0, v.oscillation())
    lat = v.lattice
    worst = math.inf
    witness = None
    for e in stencil.directions:
        vals, avail = _delta_all(v, e)
        masked = np.where(avail, vals, np.inf)
        k = int(np.argmin(masked))
        if masked[k] < worst:
            worst = float(masked[k])
            witness = (k, e)
    for axis in (0, 1):
        vals = _clipped_axis_all(v, axis)
        k = int(np.argmin(vals))
        if vals[k] < worst:
            worst = float(vals[k])
            witness = (k, (1, 0) if axis == 0 else (0, 1))
    ok = worst >= -tol
    return ConvexityReport(
        ok=ok,
        min_value=worst,
        witness_node=None if ok else tuple(lat.coords[witness[0]]),
        witness_direction=None if ok else witness[1],
    )


def discrete_laplacian(v, k):
    """Sum of the axis second differences at interior node k (clipped arms
    near a projected boundary)."""
    return second_difference_clipped(v, k, 0) + second_difference_clipped(v, k, 1)


def discrete_laplacian_all(v):
    return _clipped_axis_all(v, 0) + _clipped_axis_all(v, 1)
