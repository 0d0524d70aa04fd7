"""Convex planar domains and their uniform lattices.

A domain is one of: an axis-aligned box, a convex polygon (counterclockwise
vertex list, collinear boundary segments allowed), or a disk.  A lattice at
mesh length ``h`` consists of the interior nodes (points of ``h*Z^2``
strictly inside the domain) plus boundary nodes.  Boundary nodes are either
lattice points lying exactly on the boundary (``exact`` mode) or the
intersections of lattice lines with the boundary adjacent to interior nodes
(``projected`` mode, the default).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DomainError",
    "LatticeError",
    "ConvexDomain",
    "Box",
    "ConvexPolygon",
    "Disk",
    "Lattice",
    "build_lattice",
    "distance_to_boundary",
    "diameter",
    "domain_from_config",
]

# Relative tolerance for classifying lattice points against the boundary.
GEOM_REL_TOL = 1e-12


class DomainError(ValueError):
    """Invalid domain description or query point outside the domain."""


class LatticeError(ValueError):
    """Lattice construction failed (e.g. h too large, incomplete boundary)."""


class ConvexDomain:
    """Base class for bounded convex domains in the plane."""

    kind = "abstract"

    def signed_distance(self, x, y):
        """Signed distance to the boundary: negative inside, positive outside.

        For polygons the outside value is a lower bound on the true distance
        (max of half-plane distances); the sign is always correct, and inside
        values are exact.
        """
        raise NotImplementedError

    def distance_to_boundary(self, x, y):
        """Exact Euclidean distance from a point of the closure to the boundary."""
        raise NotImplementedError

    def diameter(self):
        raise NotImplementedError

    def bounding_box(self):
        """(xmin, ymin, xmax, ymax) enclosing the domain."""
        raise NotImplementedError

    def exit_parameter(self, p, q):
        """Smallest s in (0, 1] with ``p + s*(q - p)`` on the boundary.

        Requires p inside (or on) and q outside (or on) the closed domain;
        unique for convex domains.
        """
        raise NotImplementedError

    def boundary_points(self, n):
        """n points on the boundary, uniformly spaced by arc length, with
        inward unit normals.  Returns (points, normals) arrays of shape (n, 2).
        """
        raise NotImplementedError

    # -- shared helpers ----------------------------------------------------

    def classify(self, x, y, tol=None):
        """'interior', 'boundary' or 'outside', with ties snapped to 'boundary'."""
        if tol is None:
            tol = GEOM_REL_TOL * self.diameter()
        sd = self.signed_distance(x, y)
        if sd < -tol:
            return "interior"
        if sd <= tol:
            return "boundary"
        return "outside"

    def contains(self, x, y, tol=None):
        return self.classify(x, y, tol) != "outside"

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True)
class Box(ConvexDomain):
    """Axis-aligned box [x0, x1] x [y0, y1]."""

    x0: float
    y0: float
    x1: float
    y1: float

    kind = "box"

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise DomainError("box corners must satisfy x1 > x0 and y1 > y0")

    def signed_distance(self, x, y):
        dx = max(self.x0 - x, x - self.x1)
        dy = max(self.y0 - y, y - self.y1)
        if dx <= 0.0 and dy <= 0.0:
            return max(dx, dy)
        return math.hypot(max(dx, 0.0), max(dy, 0.0))

    def distance_to_boundary(self, x, y):
        sd = self.signed_distance(x, y)
        if sd > GEOM_REL_TOL * self.diameter():
            raise DomainError(f"point ({x}, {y}) lies outside the domain")
        return max(-sd, 0.0)

    def diameter(self):
        return math.hypot(self.x1 - self.x0, self.y1 - self.y0)

    def bounding_box(self):
        return (self.x0, self.y0, self.x1, self.y1)

    def exit_parameter(self, p, q):
        return _exit_halfplanes(_box_halfplanes(self), p, q)

    def boundary_points(self, n):
        verts = np.array(
            [[self.x0, self.y0], [self.x1, self.y0], [self.x1, self.y1], [self.x0, self.y1]]
        )
        return _polyline_samples(verts, n)

    def to_dict(self):
        return {"kind": "box", "box": [self.x0, self.y0, self.x1, self.y1]}


def _box_halfplanes(b):
    # outward normals n, offsets c with the box = {n.p <= c}
    return [
        (np.array([-1.0, 0.0]), -b.x0),
        (np.array([1.0, 0.0]), b.x1),
        (np.array([0.0, -1.0]), -b.y0),
        (np.array([0.0, 1.0]), b.y1),
    ]


@dataclass(frozen=True)
class ConvexPolygon(ConvexDomain):
    """Convex polygon given by a counterclockwise vertex list.

    Collinear consecutive edges are allowed; reflex corners are not.
    """

    vertices: tuple

    kind = "polygon"

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[0] < 3 or verts.shape[1] != 2:
            raise DomainError("polygon needs at least 3 vertices of dimension 2")
        object.__setattr__(self, "vertices", tuple(map(tuple, verts)))
        n = verts.shape[0]
        area2 = 0.0
        for i in range(n):
            a, b, c = verts[i], verts[(i + 1) % n], verts[(i + 2) % n]
            cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
            scale = max(1.0, np.abs(verts).max()) ** 2
            if cross < -1e-12 * scale:
                raise DomainError("polygon vertices must be convex and counterclockwise")
            area2 += a[0] * b[1] - b[0] * a[1]
        if area2 <= 0.0:
            raise DomainError("polygon must have positive area (counterclockwise order)")

    def _verts(self):
        return np.asarray(self.vertices, dtype=float)

    def _halfplanes(self):
        verts = self._verts()
        n = verts.shape[0]
        planes = []
        for i in range(n):
            a, b = verts[i], verts[(i + 1) % n]
            edge = b - a
            length = math.hypot(edge[0], edge[1])
            if length == 0.0:
                continue
            normal = np.array([edge[1], -edge[0]]) / length  # outward for CCW
            planes.append((normal, float(normal @ a)))
        return planes

    def signed_distance(self, x, y):
        p = np.array([x, y])
        return max(float(n @ p - c) for n, c in self._halfplanes())

    def distance_to_boundary(self, x, y):
        if self.signed_distance(x, y) > GEOM_REL_TOL * self.diameter():
            raise DomainError(f"point ({x}, {y}) lies outside the domain")
        verts = self._verts()
        n = verts.shape[0]
        best = math.inf
        for i in range(n):
            best = min(best, _dist_to_segment(x, y, verts[i], verts[(i + 1) % n]))
        return best

    def diameter(self):
        verts = self._verts()
        diffs = verts[:, None, :] - verts[None, :, :]
        return float(np.sqrt((diffs**2).sum(axis=2)).max())

    def bounding_box(self):
        verts = self._verts()
        return (
            float(verts[:, 0].min()),
            float(verts[:, 1].min()),
            float(verts[:, 0].max()),
            float(verts[:, 1].max()),
        )

    def exit_parameter(self, p, q):
        return _exit_halfplanes(self._halfplanes(), p, q)

    def boundary_points(self, n):
        return _polyline_samples(self._verts(), n)

    def to_dict(self):
        return {"kind": "polygon", "vertices": [list(v) for v in self.vertices]}


@dataclass(frozen=True)
class Disk(ConvexDomain):
    """Disk of given radius centered at (cx, cy)."""

    radius: float
    cx: float = 0.0
    cy: float = 0.0

    kind = "disk"

    def __post_init__(self):
        if self.radius <= 0:
            raise DomainError("disk radius must be positive")

    def signed_distance(self, x, y):
        return math.hypot(x - self.cx, y - self.cy) - self.radius

    def distance_to_boundary(self, x, y):
        sd = self.signed_distance(x, y)
        if sd > GEOM_REL_TOL * self.diameter():
            raise DomainError(f"point ({x}, {y}) lies outside the domain")
        return max(-sd, 0.0)

    def diameter(self):
        return 2.0 * self.radius

    def bounding_box(self):
        r = self.radius
        return (self.cx - r, self.cy - r, self.cx + r, self.cy + r)

    def exit_parameter(self, p, q):
        # solve |p + s d - c|^2 = r^2 for the root in (0, 1]
        d = (q[0] - p[0], q[1] - p[1])
        rel = (p[0] - self.cx, p[1] - self.cy)
        a = d[0] ** 2 + d[1] ** 2
        b = 2.0 * (rel[0] * d[0] + rel[1] * d[1])
        c = rel[0] ** 2 + rel[1] ** 2 - self.radius**2
        disc = b * b - 4.0 * a * c
        if a == 0.0 or disc < 0.0:
            raise DomainError("segment does not cross the disk boundary")
        s = (-b + math.sqrt(disc)) / (2.0 * a)
        return min(max(s, 0.0), 1.0)

    def boundary_points(self, n):
        theta = 2.0 * np.pi * np.arange(n) / n
        outward = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        pts = np.array([self.cx, self.cy]) + self.radius * outward
        return pts, -outward

    def to_dict(self):
        return {"kind": "disk", "radius": self.radius, "center": [self.cx, self.cy]}


def _dist_to_segment(x, y, a, b):
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return math.hypot(x - a[0], y - a[1])
    t = ((x - a[0]) * ab[0] + (y - a[1]) * ab[1]) / denom
    t = min(max(t, 0.0), 1.0)
    return math.hypot(x - (a[0] + t * ab[0]), y - (a[1] + t * ab[1]))


def _exit_halfplanes(planes, p, q):
    d = (q[0] - p[0], q[1] - p[1])
    s_exit = math.inf
    for n, c in planes:
        nd = n[0] * d[0] + n[1] * d[1]
        if nd > 0.0:
            s = (c - (n[0] * p[0] + n[1] * p[1])) / nd
            s_exit = min(s_exit, s)
    if not math.isfinite(s_exit):
        raise DomainError("segment does not leave the domain")
    return min(max(s_exit, 0.0), 1.0)


def _polyline_samples(verts, n):
    closed = np.vstack([verts, verts[:1]])
    seg = np.diff(closed, axis=0)
    seg_len = np.sqrt((seg**2).sum(axis=1))
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    perim = cum[-1]
    s = perim * np.arange(n) / n
    idx = np.searchsorted(cum, s, side="right") - 1
    idx = np.clip(idx, 0, len(seg_len) - 1)
    local = (s - cum[idx]) / seg_len[idx]
    pts = closed[idx] + local[:, None] * seg[idx]
    tang = seg[idx] / seg_len[idx][:, None]
    normals = np.stack([-tang[:, 1], tang[:, 0]], axis=1)  # inward for CCW
    return pts, normals


# ---------------------------------------------------------------------------
# Lattice


# axis step order used throughout: +x, -x, +y, -y
AXIS_STEPS = ((1, 0), (-1, 0), (0, 1), (0, -1))


@dataclass
class Lattice:
    """Interior and boundary nodes of a domain at mesh length h.

    Nodes are numbered with the interior first (lexicographic in the integer
    multi-index) and the boundary after.  ``axis_neighbor_ids[k, d]`` holds
    the node id of interior node k's neighbor in axis step d (order
    +x, -x, +y, -y) and ``axis_arms[k, d]`` the distance to it (h, except for
    projected boundary neighbors which may sit closer).
    """

    domain: ConvexDomain
    h: float
    interior_mi: np.ndarray  # (n_interior, 2) int
    coords: np.ndarray  # (n_nodes, 2) float, interior then boundary
    boundary_on_lattice: np.ndarray  # (n_boundary,) bool
    axis_neighbor_ids: np.ndarray  # (n_interior, 4) int
    axis_arms: np.ndarray  # (n_interior, 4) float
    _mi_to_node: dict = field(repr=False)
    _direction_tables: dict = field(default_factory=dict, repr=False)

    @property
    def n_interior(self):
        return self.interior_mi.shape[0]

    @property
    def n_boundary(self):
        return self.coords.shape[0] - self.n_interior

    @property
    def n_nodes(self):
        return self.coords.shape[0]

    @property
    def interior_coords(self):
        return self.coords[: self.n_interior]

    @property
    def boundary_coords(self):
        return self.coords[self.n_interior :]

    def node_id_at(self, mi):
        """Node id of the lattice point with multi-index mi, or -1."""
        return self._mi_to_node.get((int(mi[0]), int(mi[1])), -1)

    def interior_id_at(self, point):
        """Interior node id of the node nearest to ``point`` (must coincide)."""
        mi = (round(point[0] / self.h), round(point[1] / self.h))
        k = self.node_id_at(mi)
        if k < 0 or k >= self.n_interior:
            raise LatticeError(f"{point} is not an interior lattice node")
        if not np.allclose(self.coords[k], point, atol=1e-9 * self.h):
            raise LatticeError(f"{point} is not an interior lattice node")
        return k

    def direction_table(self, e):
        """(n_interior, 2) node ids of x + h*e and x - h*e, -1 if absent.

        Only nodes sitting exactly on lattice points participate (interior
        nodes and on-lattice boundary nodes), which is the exact-step policy
        for wide directions.
        """
        key = (int(e[0]), int(e[1]))
        tbl = self._direction_tables.get(key)
        if tbl is None:
            n = self.n_interior
            tbl = np.full((n, 2), -1, dtype=np.int64)
            get = self._mi_to_node.get
            for k in range(n):
                i, j = int(self.interior_mi[k, 0]), int(self.interior_mi[k, 1])
                tbl[k, 0] = get((i + key[0], j + key[1]), -1)
                tbl[k, 1] = get((i - key[0], j - key[1]), -1)
            self._direction_tables[key] = tbl
        return tbl

    def interior_distances_to_boundary(self):
        d = np.empty(self.n_interior)
        for k, (x, y) in enumerate(self.interior_coords):
            d[k] = self.domain.distance_to_boundary(x, y)
        return d

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("x,y,role\n")
            for k in range(self.n_nodes):
                role = "interior" if k < self.n_interior else "boundary"
                fh.write(f"{float(self.coords[k, 0])!r},{float(self.coords[k, 1])!r},{role}\n")


def build_lattice(domain, h, boundary_mode="projected"):
    """Build the lattice of interior and boundary nodes at mesh length h.

    ``projected`` inserts, for every interior node missing an axis neighbor,
    the intersection of the lattice line with the boundary as a boundary node
    (the intersection may be off-lattice).  ``exact`` takes the lattice points
    lying on the boundary, which only yields a usable lattice when the
    boundary passes through lattice points (grid-aligned boxes).
    """
    if h <= 0:
        raise LatticeError("mesh length h must be positive")
    if boundary_mode not in ("projected", "exact"):
        raise LatticeError(f"unknown boundary mode {boundary_mode!r}")

    tol = GEOM_REL_TOL * max(domain.diameter(), 1.0)
    xmin, ymin, xmax, ymax = domain.bounding_box()
    imin, imax = math.floor(xmin / h) - 1, math.ceil(xmax / h) + 1
    jmin, jmax = math.floor(ymin / h) - 1, math.ceil(ymax / h) + 1

    interior = []
    on_boundary = []
    for i in range(imin, imax + 1):
        for j in range(jmin, jmax + 1):
            cls = domain.classify(i * h, j * h, tol)
            if cls == "interior":
                interior.append((i, j))
            elif cls == "boundary":
                on_boundary.append((i, j))

    if not interior:
        raise LatticeError(f"no interior lattice nodes at h={h}; h is too large for the domain")

    interior_mi = np.array(sorted(interior), dtype=np.int64)
    n_int = interior_mi.shape[0]
    mi_to_node = {(int(i), int(j)): k for k, (i, j) in enumerate(interior_mi)}

    boundary_coords = []
    boundary_is_lattice = []

    def add_boundary_lattice(mi):
        key = (int(mi[0]), int(mi[1]))
        node = mi_to_node.get(key, -1)
        if node >= 0:
            return node
        node = n_int + len(boundary_coords)
        mi_to_node[key] = node
        boundary_coords.append((key[0] * h, key[1] * h))
        boundary_is_lattice.append(True)
        return node

    axis_ids = np.full((n_int, 4), -1, dtype=np.int64)
    axis_arms = np.full((n_int, 4), h, dtype=float)

    if boundary_mode == "exact":
        if not on_boundary:
            raise LatticeError(
                "'exact' boundary mode found no lattice points on the domain boundary"
            )
        for mi in on_boundary:
            add_boundary_lattice(mi)
        for k in range(n_int):
            i, j = int(interior_mi[k, 0]), int(interior_mi[k, 1])
            for d, (di, dj) in enumerate(AXIS_STEPS):
                nb = mi_to_node.get((i + di, j + dj), -1)
                if nb < 0:
                    raise LatticeError(
                        f"interior node ({i * h}, {j * h}) is missing its axis neighbor "
                        f"in step ({di}, {dj}); 'exact' boundary mode cannot complete "
                        "this lattice, use 'projected'"
                    )
                axis_ids[k, d] = nb
    else:
        coord_key_scale = 1.0 / (tol if tol > 0 else 1e-15)
        offlattice_keys = {}

        def add_boundary_point(x, y):
            key = (round(x * coord_key_scale), round(y * coord_key_scale))
            node = offlattice_keys.get(key, -1)
            if node >= 0:
                return node
            node = n_int + len(boundary_coords)
            offlattice_keys[key] = node
            boundary_coords.append((x, y))
            boundary_is_lattice.append(False)
            return node

        boundary_mi_set = {(int(i), int(j)) for i, j in on_boundary}
        for k in range(n_int):
            i, j = int(interior_mi[k, 0]), int(interior_mi[k, 1])
            x, y = i * h, j * h
            for d, (di, dj) in enumerate(AXIS_STEPS):
                mi_nb = (i + di, j + dj)
                nb = mi_to_node.get(mi_nb, -1)
                if nb >= 0:
                    axis_ids[k, d] = nb
                    continue
                if mi_nb in boundary_mi_set:
                    axis_ids[k, d] = add_boundary_lattice(mi_nb)
                    continue
                # neighbor lattice point is outside: project onto the boundary
                q = (mi_nb[0] * h, mi_nb[1] * h)
                s = domain.exit_parameter((x, y), q)
                if s <= 0.0:
                    raise LatticeError(
                        f"boundary projection failed at interior node ({x}, {y})"
                    )
                bx, by = x + s * di * h, y + s * dj * h
                axis_ids[k, d] = add_boundary_point(bx, by)
                axis_arms[k, d] = s * h

    coords = np.empty((n_int + len(boundary_coords), 2))
    coords[:n_int] = interior_mi * h
    if boundary_coords:
        coords[n_int:] = np.array(boundary_coords)

    return Lattice(
        domain=domain,
        h=h,
        interior_mi=interior_mi,
        coords=coords,
        boundary_on_lattice=np.array(boundary_is_lattice, dtype=bool),
        axis_neighbor_ids=axis_ids,
        axis_arms=axis_arms,
        _mi_to_node=mi_to_node,
    )


def distance_to_boundary(domain, point):
    """Exact distance from a point of the closed domain to its boundary."""
    return domain.distance_to_boundary(point[0], point[1])


def diameter(domain):
    return domain.diameter()


def domain_from_config(cfg):
    """Build a domain from flat config keys ``domain.kind`` etc."""
    kind = cfg.get("domain.kind")
    if kind == "box":
        box = cfg.get("domain.box")
        if box is None or len(box) != 4:
            raise DomainError("domain.box must be [x0, y0, x1, y1]")
        return Box(*map(float, box))
    if kind == "polygon":
        verts = cfg.get("domain.vertices")
        if not verts:
            raise DomainError("domain.vertices is required for polygon domains")
        return ConvexPolygon(tuple(map(tuple, verts)))
    if kind == "disk":
        radius = cfg.get("domain.radius")
        if radius is None:
            raise DomainError("domain.radius is required for disk domains")
        center = cfg.get("domain.center", [0.0, 0.0])
        return Disk(float(radius), float(center[0]), float(center[1]))
    raise DomainError(f"unknown domain.kind {kind!r}")
