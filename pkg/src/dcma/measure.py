"""Discrete subdifferential polytopes and the Monge-Ampere measure.

The subdifferential of a mesh function v at an interior node x0 is the
convex polygon of slopes p with ``p . (x - x0) <= v(x) - v(x0)`` for every
node x.  Its area is the node's Monge-Ampere mass; the measure of the whole
domain is the sum over interior nodes.

The polygon is computed by half-plane clipping.  The four axis-neighbor
constraints already bound the slopes (they form a rectangle containing the
polytope), so clipping starts from that rectangle and only processes the
remaining constraints that can actually cut it.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .meshfn import is_discrete_convex

__all__ = [
    "SubdiffPolytope",
    "MAMeasure",
    "NonConvexWarning",
    "subdifferential",
    "ma_measure",
    "mass_bound_check",
    "axis_slope_rectangle",
]

# polygons with area below DEGENERATE_REL * osc(v)^2 are reported as 0
DEGENERATE_REL = 1e-14


class NonConvexWarning(UserWarning):
    """The input mesh function is not discrete convex."""


@dataclass
class SubdiffPolytope:
    """Convex polygon of supporting slopes at one node."""

    node: tuple
    node_id: int
    vertices: np.ndarray  # (k, 2) counterclockwise, possibly empty
    area: float
    n_constraints: int

    def contains(self, p, tol=1e-9):
        """Check p against the stored vertex polygon (not the constraints)."""
        k = self.vertices.shape[0]
        if k < 3:
            return False
        for t in range(k):
            a = self.vertices[t]
            b = self.vertices[(t + 1) % k]
            cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
            if cross < -tol:
                return False
        return True


@dataclass
class MAMeasure:
    """Per-node Monge-Ampere masses and their total."""

    node_masses: np.ndarray  # (n_interior,)
    total: float


def axis_slope_rectangle(v, k):
    """Slope bounds from the four axis-neighbor constraints at node k.

    Returns (p1min, p1max, p2min, p2max); the subdifferential is contained in
    this rectangle.  The bounds use the actual arm lengths, so clipped
    boundary arms are handled.
    """
    lat = v.lattice
    ids = lat.axis_neighbor_ids[k]
    arms = lat.axis_arms[k]
    v0 = v.values[k]
    p1max = (v.values[ids[0]] - v0) / arms[0]
    p1min = -(v.values[ids[1]] - v0) / arms[1]
    p2max = (v.values[ids[2]] - v0) / arms[2]
    p2min = -(v.values[ids[3]] - v0) / arms[3]
    return p1min, p1max, p2min, p2max


def _clip_halfplane(poly, n, c, tol):
    """Sutherland-Hodgman clip of a polygon against {p : n.p <= c}."""
    m = poly.shape[0]
    if m == 0:
        return poly
    d = poly @ n - c
    inside = d <= tol
    if inside.all():
        return poly
    if not inside.any():
        return poly[:0]
    out = []
    for t in range(m):
        t2 = (t + 1) % m
        if inside[t]:
            out.append(poly[t])
            if not inside[t2]:
                s = d[t] / (d[t] - d[t2])
                out.append(poly[t] + s * (poly[t2] - poly[t]))
        elif inside[t2]:
            s = d[t] / (d[t] - d[t2])
            out.append(poly[t] + s * (poly[t2] - poly[t]))
    return np.array(out)


def _shoelace(poly):
    if poly.shape[0] < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def subdifferential(
    v,
    k,
    constraint_radius=None,
    check_convex=True,
    on_nonconvex="warn",
):
    """Subdifferential polytope of mesh function v at interior node k.

    ``constraint_radius`` limits the constraint set to nodes within that
    distance of the base node (a documented speed/accuracy knob); by default
    every node participates.  Discrete convexity is a precondition; with
    ``on_nonconvex='warn'`` a non-convex input is still evaluated, with
    ``'error'`` it raises.
    """
    if check_convex:
        rep = is_discrete_convex(v)
        if not rep.ok:
            msg = (
                f"mesh function is not discrete convex (min directional second "
                f"difference {rep.min_value:.3e} at {rep.witness_node})"
            )
            if on_nonconvex == "error":
                raise ValueError(msg)
            warnings.warn(msg, NonConvexWarning, stacklevel=2)
    return _subdifferential_unchecked(v, k, constraint_radius)


def _subdifferential_unchecked(v, k, constraint_radius=None):
    lat = v.lattice
    x0 = lat.coords[k]
    v0 = v.values[k]

    normals = lat.coords - x0
    offsets = v.values - v0
    keep = np.ones(lat.n_nodes, dtype=bool)
    keep[k] = False
    if constraint_radius is not None:
        keep &= (normals**2).sum(axis=1) <= constraint_radius**2
    normals = normals[keep]
    offsets = offsets[keep]
    n_constraints = normals.shape[0]

    p1min, p1max, p2min, p2max = axis_slope_rectangle(v, k)
    if p1max < p1min or p2max < p2min:
        # non-convex along an axis: the feasible set is empty
        return SubdiffPolytope(
            node=tuple(x0),
            node_id=k,
            vertices=np.empty((0, 2)),
            area=0.0,
            n_constraints=n_constraints,
        )
    poly = np.array(
        [[p1min, p2min], [p1max, p2min], [p1max, p2max], [p1min, p2max]], dtype=float
    )

    osc = v.oscillation()
    span = max(
        1.0, abs(p1min), abs(p1max), abs(p2min), abs(p2max), osc / max(lat.h, 1e-300)
    )
    tol = 1e-13 * span * max(1.0, lat.domain.diameter())

    # drop constraints that cannot cut the rectangle: max over its corners of
    # n.p already satisfies the constraint
    corner_max = np.maximum(
        np.maximum(poly[0] @ normals.T, poly[1] @ normals.T),
        np.maximum(poly[2] @ normals.T, poly[3] @ normals.T),
    )
    active = corner_max > offsets - tol
    normals = normals[active]
    offsets = offsets[active]

    order = np.argsort(np.arctan2(normals[:, 1], normals[:, 0]))
    for t in order:
        poly = _clip_halfplane(poly, normals[t], float(offsets[t]), tol)
        if poly.shape[0] == 0:
            break

    area = _shoelace(poly)
    if area < DEGENERATE_REL * max(osc, 1e-300) ** 2:
        area = 0.0
    return SubdiffPolytope(
        node=tuple(x0),
        node_id=k,
        vertices=poly,
        area=area,
        n_constraints=n_constraints,
    )


def ma_measure(v, check_convex=True, on_nonconvex="warn", constraint_radius=None):
    """Monge-Ampere measure of a discrete convex mesh function.

    Node masses are the subdifferential polytope areas of the interior nodes;
    the total is their sum in node order.
    """
    if check_convex:
        rep = is_discrete_convex(v)
        if not rep.ok:
            msg = (
                f"mesh function is not discrete convex (min directional second "
                f"difference {rep.min_value:.3e} at {rep.witness_node}); "
                "evaluating the measure anyway"
            )
            if on_nonconvex == "error":
                raise ValueError(msg)
            warnings.warn(msg, NonConvexWarning, stacklevel=2)
    n = v.lattice.n_interior
    masses = np.empty(n)
    for k in range(n):
        masses[k] = _subdifferential_unchecked(v, k, constraint_radius).area
    return MAMeasure(node_masses=masses, total=float(masses.sum()))


def mass_bound_check(u, f, bound_constant, measure=None):
    """Compare the total MA mass of u against the lattice sum and integral
    of the source density f.

    Reports ``total`` (MA mass), ``lattice_sum`` (sum of h^2 f over interior
    nodes), ``integral`` (midpoint quadrature of f over the full lattice
    cells) and the ratio total/integral, flagged against the given constant.
    ``f`` takes an (n, 2) array of points.
    """
    lat = u.lattice
    h = lat.h
    if measure is None:
        measure = ma_measure(u, check_convex=False)
    total = measure.total
    fx = np.asarray(f(lat.interior_coords), dtype=float)
    lattice_sum = float(h * h * fx.sum())

    # midpoint quadrature over lattice cells whose four corners are nodes
    mi = lat.interior_mi
    centers = []
    mi_set = lat._mi_to_node
    for i, j in map(tuple, mi):
        for ci, cj in ((i, j), (i - 1, j), (i, j - 1), (i - 1, j - 1)):
            if (
                (ci, cj) in mi_set
                and (ci + 1, cj) in mi_set
                and (ci, cj + 1) in mi_set
                and (ci + 1, cj + 1) in mi_set
            ):
                centers.append(((ci + 0.5) * h, (cj + 0.5) * h))
    centers = np.unique(np.array(centers), axis=0) if centers else np.empty((0, 2))
    integral = float(h * h * np.asarray(f(centers), dtype=float).sum()) if len(centers) else 0.0

    ratio = total / integral if integral > 0 else math.inf if total > 0 else 0.0
    return {
        "total_mass": total,
        "lattice_sum": lattice_sum,
        "integral": integral,
        "ratio": ratio,
        "within_bound": bool(ratio <= bound_constant),
    }
