import numpy as np
import pytest

from dcma.domain import Box, Disk, build_lattice
from dcma.interp import (
    OutsideHullError,
    Triangulation,
    interpolate,
    lipschitz_modulus,
    sup_error_on_compact,
)
from dcma.meshfn import MeshFunction, is_discrete_convex


def sample(lattice, fn):
    return MeshFunction.from_callable(lattice, lambda p: fn(p[:, 0], p[:, 1]))


@pytest.fixture
def box_lattice():
    return build_lattice(Box(0, 0, 1, 1), 0.25)


def test_reproduces_node_values(box_lattice):
    rng = np.random.default_rng(0)
    v = MeshFunction(box_lattice, rng.normal(size=box_lattice.n_nodes))
    plf = interpolate(v)
    got = plf(box_lattice.coords)
    assert np.allclose(got, v.values, atol=1e-12)


def test_axis_midpoint(box_lattice):
    rng = np.random.default_rng(1)
    v = MeshFunction(box_lattice, rng.normal(size=box_lattice.n_nodes))
    plf = interpolate(v)
    k = box_lattice.interior_id_at((0.25, 0.5))
    kp = box_lattice.interior_id_at((0.5, 0.5))
    mid = 0.5 * (box_lattice.coords[k] + box_lattice.coords[kp])
    assert plf(mid) == pytest.approx(0.5 * (v.values[k] + v.values[kp]), abs=1e-13)


def test_cell_barycenter_mean_of_vertices(box_lattice):
    v = MeshFunction(box_lattice, np.zeros(box_lattice.n_nodes))
    tri = Triangulation.build(box_lattice)
    ids = tri.cells()[0]
    v.values[list(ids)] = [0.0, 1.0, 2.0]
    plf = interpolate(v, tri)
    bary = box_lattice.coords[list(ids)].mean(axis=0)
    assert plf(bary) == pytest.approx(1.0, abs=1e-12)


def test_axis_linearity_property(box_lattice):
    # I(v)(x + t h e_i) = (1-t) v(x) + t v(x + h e_i) for random t
    rng = np.random.default_rng(2)
    v = MeshFunction(box_lattice, rng.normal(size=box_lattice.n_nodes))
    plf = interpolate(v)
    scale = max(1.0, np.abs(v.values).max())
    for _ in range(300):
        k = int(rng.integers(box_lattice.n_interior))
        d = int(rng.integers(4))
        nb = box_lattice.axis_neighbor_ids[k, d]
        t = float(rng.uniform())
        p = (1 - t) * box_lattice.coords[k] + t * box_lattice.coords[nb]
        want = (1 - t) * v.values[k] + t * v.values[nb]
        assert abs(plf(p) - want) <= 1e-12 * scale


def test_affine_reproduction():
    # exact boundary mode keeps the box corners, so the hull is the full box
    lat = build_lattice(Box(0, 0, 1, 1), 0.25, boundary_mode="exact")
    v = sample(lat, lambda x, y: 3 * x - 2 * y + 0.5)
    plf = interpolate(v)
    rng = np.random.default_rng(3)
    pts = rng.uniform(0.0, 1.0, size=(200, 2))
    want = 3 * pts[:, 0] - 2 * pts[:, 1] + 0.5
    assert np.allclose(plf(pts), want, atol=1e-12)


def test_convexity_transfer_along_axis_segments(box_lattice):
    # discrete convex v: slopes of I(v) along a lattice line are nondecreasing
    rng = np.random.default_rng(4)
    planes = rng.normal(size=(6, 3))
    v = sample(
        box_lattice,
        lambda x, y: np.max([a * x + b * y + c for a, b, c in planes], axis=0),
    )
    assert is_discrete_convex(v).ok
    plf = interpolate(v)
    for j in (1, 2, 3):
        y = 0.25 * j
        xs = np.linspace(0.0, 1.0, 33)
        vals = plf(np.stack([xs, np.full_like(xs, y)], axis=1))
        slopes = np.diff(vals) / np.diff(xs)
        assert np.all(np.diff(slopes) >= -1e-10)


def test_sup_error_zero_against_itself(box_lattice):
    rng = np.random.default_rng(5)
    v = MeshFunction(box_lattice, rng.normal(size=box_lattice.n_nodes))
    plf = interpolate(v)
    err = sup_error_on_compact(v, plf, (0.25, 0.25, 0.75, 0.75), 17)
    assert err == pytest.approx(0.0, abs=1e-13)


def test_sup_error_affine_exact(box_lattice):
    v = sample(box_lattice, lambda x, y: 1 - x + 2 * y)
    err = sup_error_on_compact(
        v, lambda p: 1 - p[:, 0] + 2 * p[:, 1], (0.25, 0.25, 0.85, 0.85), 29
    )
    assert err == pytest.approx(0.0, abs=1e-12)


def test_sup_error_paraboloid_quarter_h_squared(box_lattice):
    # For v = |x|^2/2 the PL error is h^2/8 at axis edge midpoints and peaks
    # at h^2/4 on the diagonal midpoints of the squares (oracle: barycentric
    # error formula err = sum_{i<j} l_i l_j |v_i - v_j|^2 / 2).
    h = 0.25
    v = sample(box_lattice, lambda x, y: 0.5 * (x * x + y * y))
    exact = lambda p: 0.5 * (p[:, 0] ** 2 + p[:, 1] ** 2)
    # density hitting cell diagonal midpoints: step h/2
    err = sup_error_on_compact(v, exact, (0.25, 0.25, 0.75, 0.75), 5)
    assert err == pytest.approx(h * h / 4.0, abs=1e-12)
    # restricted to an axis line through nodes the error is h^2/8
    plf = interpolate(v)
    xs = np.arange(0.25, 0.75 + 1e-9, h / 2)
    pts = np.stack([xs, np.full_like(xs, 0.5)], axis=1)
    line_err = np.abs(plf(pts) - exact(pts)).max()
    assert line_err == pytest.approx(h * h / 8.0, abs=1e-12)


def test_outside_hull_raises(box_lattice):
    v = sample(box_lattice, lambda x, y: x)
    plf = interpolate(v)
    with pytest.raises(OutsideHullError):
        plf(np.array([1.5, 0.5]))
    assert np.isnan(plf(np.array([[1.5, 0.5]]), outside="nan")[0])


def test_fringe_covers_disk_lattice_nodes():
    lat = build_lattice(Disk(1.0), 0.4)
    rng = np.random.default_rng(6)
    v = MeshFunction(lat, rng.normal(size=lat.n_nodes))
    plf = interpolate(v)
    got = plf(lat.coords)
    assert np.allclose(got, v.values, atol=1e-10)
    # points slightly inside the boundary nodes evaluate too
    for b in range(lat.n_boundary):
        p = lat.boundary_coords[b] * 0.98
        val = plf(p, outside="nan")
        assert np.isfinite(val)


def test_fringe_axis_stub_linearity_box_offgrid():
    # h = 0.3 on the unit box: boundary nodes are projected, cells at the
    # far edges are clipped; axis stubs from interior to boundary nodes
    # must still interpolate linearly
    lat = build_lattice(Box(0, 0, 1, 1), 0.3)
    rng = np.random.default_rng(7)
    v = MeshFunction(lat, rng.normal(size=lat.n_nodes))
    plf = interpolate(v)
    for k in range(lat.n_interior):
        for d in range(4):
            nb = lat.axis_neighbor_ids[k, d]
            for t in (0.25, 0.5, 0.9):
                p = (1 - t) * lat.coords[k] + t * lat.coords[nb]
                want = (1 - t) * v.values[k] + t * v.values[nb]
                assert plf(p) == pytest.approx(want, abs=1e-11)


def test_lipschitz_affine(box_lattice):
    v = sample(box_lattice, lambda x, y: 2 * x - 5 * y + 1)
    assert lipschitz_modulus(v, (0.25, 0.25, 0.75, 0.75)) == pytest.approx(5.0)


def test_lipschitz_constant_zero(box_lattice):
    v = sample(box_lattice, lambda x, y: 0 * x + 4.0)
    assert lipschitz_modulus(v, (0.25, 0.25, 0.75, 0.75)) == 0.0


def test_lipschitz_paraboloid_bound():
    lat = build_lattice(Box(-1, -1, 1, 1), 0.25)
    v = sample(lat, lambda x, y: 0.5 * (x * x + y * y))
    got = lipschitz_modulus(v, (-0.5, -0.5, 0.5, 0.5))
    # difference quotient of x^2/2: max |x + h/2| over the enlarged box
    assert got <= 0.5 + lat.h / 2 + lat.h + 1e-12
    assert got >= 0.5 - 1e-12


def test_lipschitz_box_too_small():
    lat = build_lattice(Box(0, 0, 1, 1), 0.25)
    with pytest.raises(ValueError):
        # enlarged box still contains no interior node: h too large
        lipschitz_modulus(sample(lat, lambda x, y: x), (0.01, 0.01, 0.02, 0.02))


@pytest.mark.parametrize("h", [0.25, 0.3])
def test_cells_tile_the_node_hull_of_the_box(h):
    # full squares plus fringe fans cover the convex hull of the node set
    # exactly for box domains: triangle areas sum to the hull area, and the
    # triangles stay inside the hull (together: a.e. disjoint coverage)
    from scipy.spatial import ConvexHull

    lat = build_lattice(Box(0, 0, 1, 1), h)
    tri = Triangulation.build(lat)
    hull = ConvexHull(lat.coords)

    def tri_area(ids):
        a, b, c = lat.coords[list(ids)]
        return 0.5 * abs(
            (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
        )

    total = sum(tri_area(ids) for ids in tri.cells())
    assert total == pytest.approx(hull.volume, abs=1e-12)
    # every triangle vertex is a node by construction; check containment of
    # barycenters in the hull
    eqs = hull.equations
    for ids in tri.cells():
        bary = lat.coords[list(ids)].mean(axis=0)
        assert np.all(eqs[:, :2] @ bary + eqs[:, 2] <= 1e-9)
