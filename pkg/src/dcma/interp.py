"""Piecewise-linear interpolation of mesh functions.

The triangulation splits every full lattice square (all four corners are
nodes) by the lower-left to upper-right diagonal.  Clipped squares near the
boundary are covered by fan triangles over the local hull of their corner
nodes and the projected boundary nodes on their edges.  Restricted to any
lattice line through nodes the interpolant is piecewise linear with
breakpoints only at nodes, so discrete convexity along an axis transfers to
the interpolant on that line.

For boxes and polygonal domains these cells cover the convex hull of the
node set exactly.  For disks, hull chords that span two clipped cells leave
slivers (area O(h^3)) that evaluate as outside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Triangulation",
    "PLFunction",
    "OutsideHullError",
    "interpolate",
    "lipschitz_modulus",
    "sup_error_on_compact",
]


class OutsideHullError(ValueError):
    """Evaluation point outside the triangulated hull of the node set."""


@dataclass
class Triangulation:
    lattice: Lattice
    i0: int
    j0: int
    node_grid: np.ndarray  # (ni, nj) node ids at lattice points, -1 absent
    full_cell: np.ndarray  # (ni-1, nj-1) bool
    fringe: dict = field(default_factory=dict)  # (ci, cj) -> list[(id0,id1,id2)]

    @classmethod
    def build(cls, lattice):
        mi = lattice.interior_mi
        i0 = int(mi[:, 0].min()) - 1
        j0 = int(mi[:, 1].min()) - 1
        ni = int(mi[:, 0].max()) + 2 - i0 + 1
        nj = int(mi[:, 1].max()) + 2 - j0 + 1
        node_grid = np.full((ni, nj), -1, dtype=np.int64)
        for (i, j), node in lattice._mi_to_node.items():
            if i0 <= i < i0 + ni and j0 <= j < j0 + nj:
                node_grid[i - i0, j - j0] = node

        full = (
            (node_grid[:-1, :-1] >= 0)
            & (node_grid[1:, :-1] >= 0)
            & (node_grid[:-1, 1:] >= 0)
            & (node_grid[1:, 1:] >= 0)
        )

        tri = cls(lattice=lattice, i0=i0, j0=j0, node_grid=node_grid, full_cell=full)
        tri._build_fringe()
        return tri

    def _cell_of_offlattice(self, x, y):
        """Cells adjacent to an off-lattice boundary node (it sits on a
        lattice line, hence on a shared cell edge)."""
        h = self.lattice.h
        gx, gy = x / h, y / h
        cells = []
        if abs(gx - round(gx)) < 1e-9:  # on a vertical lattice line
            i = int(round(gx))
            j = math.floor(gy + 1e-12)
            cells += [(i - 1, j), (i, j)]
        if abs(gy - round(gy)) < 1e-9:  # on a horizontal lattice line
            j = int(round(gy))
            i = math.floor(gx + 1e-12)
            cells += [(i, j - 1), (i, j)]
        return cells

    def _build_fringe(self):
        lat = self.lattice
        h = lat.h
        members = {}  # (ci, cj) absolute cell index -> set of node ids
        n_int = lat.n_interior
        for b in range(lat.n_boundary):
            if lat.boundary_on_lattice[b]:
                continue
            x, y = lat.boundary_coords[b]
            for cell in self._cell_of_offlattice(x, y):
                members.setdefault(cell, set()).add(n_int + b)

        ni, nj = self.full_cell.shape
        # corner nodes of every non-full cell that has any chance of content
        candidates = set(members)
        for ci in range(ni):
            for cj in range(nj):
                if not self.full_cell[ci, cj] and (
                    self.node_grid[ci : ci + 2, cj : cj + 2] >= 0
                ).any():
                    candidates.add((ci + self.i0, cj + self.j0))

        for ci, cj in candidates:
            gi, gj = ci - self.i0, cj - self.j0
            if not (0 <= gi < ni and 0 <= gj < nj) or self.full_cell[gi, gj]:
                continue
            ids = set(members.get((ci, cj), ()))
            for di in (0, 1):
                for dj in (0, 1):
                    node = self.node_grid[gi + di, gj + dj]
                    if node >= 0:
                        ids.add(int(node))
            if len(ids) < 3:
                continue
            ids = sorted(ids)
            pts = lat.coords[ids]
            center = pts.mean(axis=0)
            order = np.argsort(np.arctan2(pts[:, 1] - center[1], pts[:, 0] - center[0]))
            hull = [ids[t] for t in _convex_hull_filter(pts[order])]
            ordered = [ids[t] for t in order]
            hull_set = set(hull)
            ring = [t for t in ordered if t in hull_set]
            if len(ring) < 3:
                continue
            tris = []
            for t in range(1, len(ring) - 1):
                tris.append((ring[0], ring[t], ring[t + 1]))
            self.fringe[(ci, cj)] = tris

    # -- queries ------------------------------------------------------------

    def cells(self):
        """All triangles as (id0, id1, id2) tuples, full squares first."""
        out = []
        ni, nj = self.full_cell.shape
        g = self.node_grid
        for ci in range(ni):
            for cj in range(nj):
                if self.full_cell[ci, cj]:
                    ll, lr = int(g[ci, cj]), int(g[ci + 1, cj])
                    ul, ur = int(g[ci, cj + 1]), int(g[ci + 1, cj + 1])
                    out.append((ll, lr, ur))
                    out.append((ll, ur, ul))
        for tris in self.fringe.values():
            out.extend(tris)
        return out


def _convex_hull_filter(pts):
    """Indices (into the angularly sorted pts) on the convex hull boundary."""
    n = len(pts)
    if n < 3:
        return list(range(n))
    keep = []
    for t in range(n):
        a = pts[(t - 1) % n]
        b = pts[t]
        c = pts[(t + 1) % n]
        cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if cross > -1e-14:
            keep.append(t)
    return keep


@dataclass
class PLFunction:
    """Evaluable piecewise-linear interpolant of a mesh function."""

    triangulation: Triangulation
    values: np.ndarray

    def __call__(self, points, outside="raise"):
        """Evaluate at points of shape (n, 2) or a single point.

        ``outside``: 'raise' errors on points outside the hull, 'nan' fills
        NaN instead.
        """
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        if single:
            pts = pts[None, :]
        out = np.full(pts.shape[0], np.nan)

        tri = self.triangulation
        lat = tri.lattice
        h = lat.h
        g = pts / h
        ci = np.floor(g[:, 0] + 1e-12).astype(int) - tri.i0
        cj = np.floor(g[:, 1] + 1e-12).astype(int) - tri.j0
        ni, nj = tri.full_cell.shape
        in_range = (ci >= 0) & (ci < ni) & (cj >= 0) & (cj < nj)
        is_full = np.zeros(pts.shape[0], dtype=bool)
        is_full[in_range] = tri.full_cell[ci[in_range], cj[in_range]]

        # vectorized path: full squares with the fixed lower-left diagonal
        if is_full.any():
            idx = np.nonzero(is_full)[0]
            fx = g[idx, 0] - (ci[idx] + tri.i0)
            fy = g[idx, 1] - (cj[idx] + tri.j0)
            ll = tri.node_grid[ci[idx], cj[idx]]
            lr = tri.node_grid[ci[idx] + 1, cj[idx]]
            ul = tri.node_grid[ci[idx], cj[idx] + 1]
            ur = tri.node_grid[ci[idx] + 1, cj[idx] + 1]
            lower = fx >= fy
            vll, vlr, vul, vur = (
                self.values[ll],
                self.values[lr],
                self.values[ul],
                self.values[ur],
            )
            # lower triangle (ll, lr, ur): v = vll + fx*(vlr-vll) + fy*(vur-vlr)
            lower_val = vll + fx * (vlr - vll) + fy * (vur - vlr)
            upper_val = vll + fy * (vul - vll) + fx * (vur - vul)
            out[idx] = np.where(lower, lower_val, upper_val)

        # slow path: fringe cells and near-edge fallbacks
        for t in np.nonzero(~is_full)[0]:
            out[t] = self._locate_slow(pts[t])

        bad = np.isnan(out)
        if bad.any() and outside == "raise":
            p = pts[np.nonzero(bad)[0][0]]
            raise OutsideHullError(f"point ({p[0]}, {p[1]}) is outside the triangulated hull")
        return float(out[0]) if single else out

    def _locate_slow(self, p):
        tri = self.triangulation
        lat = tri.lattice
        h = lat.h
        base_i = math.floor(p[0] / h + 1e-12)
        base_j = math.floor(p[1] / h + 1e-12)
        seen = set()
        for di in (0, -1, 1):
            for dj in (0, -1, 1):
                cell = (base_i + di, base_j + dj)
                if cell in seen:
                    continue
                seen.add(cell)
                val = self._eval_in_cell(cell, p)
                if val is not None:
                    return val
        return np.nan

    def _eval_in_cell(self, cell, p):
        tri = self.triangulation
        gi, gj = cell[0] - tri.i0, cell[1] - tri.j0
        ni, nj = tri.full_cell.shape
        lat = tri.lattice
        if 0 <= gi < ni and 0 <= gj < nj and tri.full_cell[gi, gj]:
            g = tri.node_grid
            ll, lr = int(g[gi, gj]), int(g[gi + 1, gj])
            ul, ur = int(g[gi, gj + 1]), int(g[gi + 1, gj + 1])
            fx = p[0] / lat.h - cell[0]
            fy = p[1] / lat.h - cell[1]
            if not (-1e-12 <= fx <= 1 + 1e-12 and -1e-12 <= fy <= 1 + 1e-12):
                return None
            v = self.values
            if fx >= fy:
                return v[ll] + fx * (v[lr] - v[ll]) + fy * (v[ur] - v[lr])
            return v[ll] + fy * (v[ul] - v[ll]) + fx * (v[ur] - v[ul])
        for tri_ids in tri.fringe.get(cell, ()):
            lam = _barycentric(lat.coords[list(tri_ids)], p)
            if lam is not None:
                return float(lam @ self.values[list(tri_ids)])
        return None


def _barycentric(verts, p, tol=1e-10):
    a, b, c = verts
    det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
    if abs(det) < 1e-300:
        return None
    l1 = ((b[0] - p[0]) * (c[1] - p[1]) - (c[0] - p[0]) * (b[1] - p[1])) / det
    l2 = ((c[0] - p[0]) * (a[1] - p[1]) - (a[0] - p[0]) * (c[1] - p[1])) / det
    l3 = 1.0 - l1 - l2
    if l1 >= -tol and l2 >= -tol and l3 >= -tol:
        return np.array([l1, l2, l3])
    return None


def interpolate(v, triangulation=None):
    """Piecewise-linear interpolant of a mesh function."""
    if triangulation is None:
        triangulation = Triangulation.build(v.lattice)
    elif triangulation.lattice is not v.lattice:
        raise ValueError("triangulation was built for a different lattice")
    return PLFunction(triangulation, v.values)


def lipschitz_modulus(v, box):
    """Directional Lipschitz estimate max |v(x+h e_i) - v(x)| / h over nodes
    in a slight (h/2) enlargement of the box (xmin, ymin, xmax, ymax).

    The box must sit well inside the domain: every node of the enlarged box
    needs full-arm axis neighbors at spacing h.
    """
    lat = v.lattice
    h = lat.h
    xmin, ymin, xmax, ymax = box
    if xmin >= xmax or ymin >= ymax:
        raise ValueError("empty box")
    pad = 0.5 * h
    c = lat.interior_coords
    inside = (
        (c[:, 0] >= xmin - pad)
        & (c[:, 0] <= xmax + pad)
        & (c[:, 1] >= ymin - pad)
        & (c[:, 1] <= ymax + pad)
    )
    if not inside.any():
        raise ValueError("mesh length too large: the box contains no interior nodes")
    best = 0.0
    found = False
    for d in range(4):
        ids = lat.axis_neighbor_ids[inside, d]
        arms = lat.axis_arms[inside, d]
        full = (arms > h * (1 - 1e-12)) & (ids < lat.n_interior)
        if not full.any():
            continue
        found = True
        diffs = np.abs(v.values[ids[full]] - v.interior_values[inside][full]) / h
        best = max(best, float(diffs.max()))
    if not found:
        raise ValueError("mesh length too large for the box: no full-arm neighbor pairs")
    return best


def sup_error_on_compact(v, exact, box, sample_density=33, triangulation=None):
    """Max |I(v) - exact| over a regular sample grid of the box.

    ``exact`` takes an (n, 2) array of points and returns values.
    """
    xmin, ymin, xmax, ymax = box
    xs = np.linspace(xmin, xmax, sample_density)
    ys = np.linspace(ymin, ymax, sample_density)
    X, Y = np.meshgrid(xs, ys)
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    plf = interpolate(v, triangulation)
    return float(np.abs(plf(pts) - np.asarray(exact(pts), dtype=float)).max())
