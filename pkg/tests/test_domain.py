import math

import numpy as np
import pytest

from dcma.domain import (
    Box,
    ConvexPolygon,
    Disk,
    DomainError,
    LatticeError,
    build_lattice,
    diameter,
    distance_to_boundary,
)


def brute_force_grid_classification(domain, h, span=3):
    """Independent oracle: classify every lattice point in a padded bbox."""
    xmin, ymin, xmax, ymax = domain.bounding_box()
    interior, boundary = [], []
    tol = 1e-12 * domain.diameter()
    for i in range(math.floor(xmin / h) - span, math.ceil(xmax / h) + span):
        for j in range(math.floor(ymin / h) - span, math.ceil(ymax / h) + span):
            sd = domain.signed_distance(i * h, j * h)
            if sd < -tol:
                interior.append((i * h, j * h))
            elif sd <= tol:
                boundary.append((i * h, j * h))
    return interior, boundary


def test_unit_box_h_half_exact():
    lat = build_lattice(Box(0, 0, 1, 1), 0.5, boundary_mode="exact")
    assert lat.n_interior == 1
    assert np.allclose(lat.interior_coords[0], (0.5, 0.5))
    assert lat.n_boundary == 8


def test_unit_box_h_quarter_exact_counts():
    # oracle: enumerate the 5x5 grid and classify
    interior, boundary = brute_force_grid_classification(Box(0, 0, 1, 1), 0.25)
    assert len(interior) == 9 and len(boundary) == 16
    lat = build_lattice(Box(0, 0, 1, 1), 0.25, boundary_mode="exact")
    assert lat.n_interior == 9
    assert lat.n_boundary == 16
    assert sorted(map(tuple, lat.interior_coords)) == sorted(interior)
    assert sorted(map(tuple, np.round(lat.boundary_coords, 12))) == sorted(boundary)


def test_unit_box_projected_matches_exact_when_grid_aligned():
    exact = build_lattice(Box(0, 0, 1, 1), 0.25, boundary_mode="exact")
    proj = build_lattice(Box(0, 0, 1, 1), 0.25, boundary_mode="projected")
    assert proj.n_interior == exact.n_interior
    # projected mode omits the 4 corners: they have no interior axis neighbor
    assert proj.n_boundary == exact.n_boundary - 4
    assert np.all(proj.axis_arms == 0.25)


def test_unit_disk_projected_h_half():
    lat = build_lattice(Disk(1.0), 0.5, boundary_mode="projected")
    assert lat.n_interior == 9
    # crossings of the axis lattice lines with the circle, adjacent to an
    # interior node; computed analytically
    s = math.sqrt(0.75)
    expected = {
        (1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0),
        (s, 0.5), (-s, 0.5), (s, -0.5), (-s, -0.5),
        (0.5, s), (-0.5, s), (0.5, -s), (-0.5, -s),
    }
    got = {tuple(np.round(c, 12)) for c in lat.boundary_coords}
    assert got == {tuple(np.round(p, 12)) for p in expected}


def test_disk_exact_mode_without_aligned_radius_fails():
    # boundary lattice points exist (e.g. (1,0)) but the lattice cannot be
    # completed along every axis line
    with pytest.raises(LatticeError):
        build_lattice(Disk(1.0), 0.5, boundary_mode="exact")


def test_exact_mode_no_boundary_lattice_points():
    with pytest.raises(LatticeError):
        build_lattice(Disk(0.9), 0.5, boundary_mode="exact")


def test_empty_interior_raises():
    with pytest.raises(LatticeError):
        build_lattice(Box(0, 0, 0.4, 0.4), 0.5)


@pytest.mark.parametrize(
    "domain,h",
    [
        (Box(0, 0, 1, 1), 0.25),
        (Box(0, 0, 1, 1), 0.3),
        (Disk(1.0), 0.3),
        (ConvexPolygon(((0, 0), (2, 0), (0, 1))), 0.2),
    ],
)
def test_axis_neighbors_complete(domain, h):
    lat = build_lattice(domain, h)
    assert np.all(lat.axis_neighbor_ids >= 0)
    assert np.all(lat.axis_arms > 0)
    assert np.all(lat.axis_arms <= h * (1 + 1e-12))
    # neighbor coordinates actually sit on the stated axis line at arm length
    for k in range(lat.n_interior):
        x = lat.interior_coords[k]
        for d, step in enumerate(((1, 0), (-1, 0), (0, 1), (0, -1))):
            nb = lat.coords[lat.axis_neighbor_ids[k, d]]
            arm = lat.axis_arms[k, d]
            assert np.allclose(nb, x + arm * np.array(step), atol=1e-12)


@pytest.mark.parametrize(
    "domain",
    [Box(0, 0, 1, 1), Disk(1.0), ConvexPolygon(((0, 0), (2, 0), (2, 1), (0, 1)))],
)
def test_refinement_monotonicity(domain):
    counts = [build_lattice(domain, h).n_interior for h in (0.4, 0.2, 0.1)]
    assert counts[0] <= counts[1] <= counts[2]


def test_interior_boundary_disjoint():
    lat = build_lattice(Disk(1.0), 0.3)
    ints = {tuple(np.round(c, 12)) for c in lat.interior_coords}
    bnds = {tuple(np.round(c, 12)) for c in lat.boundary_coords}
    assert not ints & bnds


def test_distance_examples():
    assert distance_to_boundary(Box(0, 0, 1, 1), (0.5, 0.5)) == pytest.approx(0.5)
    assert distance_to_boundary(Box(0, 0, 1, 1), (0.25, 0.5)) == pytest.approx(0.25)
    assert distance_to_boundary(Disk(1.0), (0.6, 0.0)) == pytest.approx(0.4)
    with pytest.raises(DomainError):
        distance_to_boundary(Box(0, 0, 1, 1), (1.5, 0.5))


def test_distance_zero_on_boundary():
    assert distance_to_boundary(Box(0, 0, 1, 1), (0.0, 0.5)) == 0.0
    assert distance_to_boundary(Disk(1.0), (1.0, 0.0)) == 0.0


def test_polygon_distance_matches_sampling_oracle():
    poly = ConvexPolygon(((0, 0), (2, 0), (2, 1), (0.5, 1.5)))
    rng = np.random.default_rng(0)
    verts = np.array(poly.vertices)
    # dense boundary sampling as an independent distance oracle
    bpts, _ = poly.boundary_points(20000)
    for _ in range(20):
        w = rng.dirichlet(np.ones(len(verts)))
        p = w @ verts
        if poly.signed_distance(*p) > -1e-9:
            continue
        d_oracle = np.sqrt(((bpts - p) ** 2).sum(axis=1)).min()
        assert poly.distance_to_boundary(*p) == pytest.approx(d_oracle, abs=1e-4)


def test_diameter_examples():
    assert diameter(Box(0, 0, 1, 1)) == pytest.approx(math.sqrt(2))
    assert diameter(Disk(1.0)) == pytest.approx(2.0)
    # oracle: max pairwise vertex distance of the triangle
    assert diameter(ConvexPolygon(((0, 0), (2, 0), (0, 1)))) == pytest.approx(math.sqrt(5))


def test_distance_at_most_half_diameter():
    for domain in (Box(0, 0, 1, 1), Disk(1.0), ConvexPolygon(((0, 0), (2, 0), (0, 1)))):
        lat = build_lattice(domain, 0.1)
        d = lat.interior_distances_to_boundary()
        assert np.all(d <= domain.diameter() / 2 + 1e-12)


def test_ties_classify_as_boundary():
    # lattice point exactly on the boundary in projected mode
    lat = build_lattice(Box(0, 0, 1, 1), 0.25, boundary_mode="projected")
    for c in lat.boundary_coords:
        assert lat.domain.signed_distance(*c) == pytest.approx(0.0, abs=1e-12)
    assert all(
        lat.domain.signed_distance(*c) < 0 for c in lat.interior_coords
    )


def test_convexity_validation():
    with pytest.raises(DomainError):
        ConvexPolygon(((0, 0), (1, 1), (1, 0), (0, 1)))  # self-crossing order
    # collinear boundary segments are allowed
    ConvexPolygon(((0, 0), (1, 0), (2, 0), (2, 1)))


def test_lattice_csv_roundtrip(tmp_path):
    lat = build_lattice(Box(0, 0, 1, 1), 0.25)
    path = tmp_path / "lat.csv"
    lat.to_csv(path)
    rows = path.read_text().strip().splitlines()
    assert rows[0] == "x,y,role"
    assert len(rows) == 1 + lat.n_nodes
    assert rows[1].endswith("interior") or rows[1].endswith("boundary")
