from __future__ import annotations

import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.spatial import ConvexHull, Delaunay

from torsimax.errors import (
    CollinearInput,
    DegenerateTriangle,
    DuplicateSites,
    InvalidDomain,
)
from torsimax.geometry import (
    LatticeDomain,
    Triangle,
    circumcircle_of,
    classify_triangles,
    clip_polygon,
    delaunay_triangulate,
    hex_centers,
    hex_tiling,
    polygon_area,
    voronoi_dual,
)


def _brute_empty_circle(pts, tris):
    for a, b, c in tris:
        (cx, cy), r = circumcircle_of(pts[a], pts[b], pts[c])
        d = np.hypot(pts[:, 0] - cx, pts[:, 1] - cy)
        d[[a, b, c]] = np.inf
        if d.min() < r * (1 - 1e-9):
            return False
    return True


def test_delaunay_matches_scipy_on_random_points():
    rng = np.random.default_rng(1)
    pts = rng.random((200, 2))
    mesh = delaunay_triangulate(pts)
    ours = {tuple(sorted(t)) for t in mesh.triangles.tolist()}
    ref = {tuple(sorted(t)) for t in Delaunay(pts).simplices.tolist()}
    assert ours == ref


def test_delaunay_empty_circumcircle_and_euler_count():
    rng = np.random.default_rng(2)
    pts = rng.normal(size=(150, 2))
    mesh = delaunay_triangulate(pts)
    assert _brute_empty_circle(pts, mesh.triangles.tolist())
    hull = len(ConvexHull(pts).vertices)
    assert mesh.n_triangles == 2 * len(pts) - 2 - hull
    assert math.isclose(mesh.areas().sum(), ConvexHull(pts).volume, rel_tol=1e-12)


def test_delaunay_cocircular_grid_is_valid_and_deterministic():
    g = np.array([(i, j) for i in range(5) for j in range(4)], dtype=float)
    m1 = delaunay_triangulate(g)
    m2 = delaunay_triangulate(g)
    assert np.array_equal(m1.triangles, m2.triangles)
    assert m1.n_triangles == 2 * 4 * 3
    assert _brute_empty_circle(g, m1.triangles.tolist())
    assert math.isclose(m1.areas().sum(), 12.0)


def test_delaunay_rejects_degenerate_input():
    with pytest.raises(CollinearInput):
        delaunay_triangulate([(0, 0), (1, 1), (2, 2), (3, 3)])
    with pytest.raises(DuplicateSites):
        delaunay_triangulate([(0, 0), (1, 0), (0, 1), (1, 0)])


def test_voronoi_vertices_are_equidistant_from_their_site():
    rng = np.random.default_rng(3)
    pts = rng.random((40, 2))
    mesh = delaunay_triangulate(pts)
    for cell in voronoi_dual(mesh):
        if not cell.bounded:
            continue
        d = np.hypot(*(cell.vertices - pts[cell.site]).T)
        nearest = np.min(np.hypot(pts[:, None, 0] - cell.vertices[None, :, 0],
                                  pts[:, None, 1] - cell.vertices[None, :, 1]), axis=0)
        assert np.allclose(d, nearest, rtol=1e-9, atol=1e-12)


def test_clip_polygon_halves_square():
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    half = clip_polygon(sq, np.array([1.0, 0.0]), 0.5)
    assert math.isclose(polygon_area(half), 0.5)
    tri = clip_polygon(sq, np.array([1.0, 1.0]), 1.0)
    assert math.isclose(polygon_area(tri), 0.5)


@settings(max_examples=50, deadline=None)
@given(st.tuples(*[st.floats(0.3, 3.0)] * 3))
def test_triangle_from_sides_roundtrip(sides):
    l1, l2, l3 = sorted(sides)
    assume(l1 + l2 > l3 * (1 + 1e-3))
    t = Triangle.from_sides(l1, l2, l3)
    assert np.allclose(t.side_lengths, (l1, l2, l3), rtol=1e-12)
    assert math.isclose(sum(t.angles()), math.pi, rel_tol=1e-12)
    abc = l1 * l2 * l3
    assert math.isclose(t.circumradius, abc / (4 * t.area), rel_tol=1e-9)


def test_triangle_from_sides_rejects_triangle_inequality_violation():
    with pytest.raises(DegenerateTriangle):
        Triangle.from_sides(1.0, 1.0, 2.5)
    with pytest.raises(DegenerateTriangle):
        Triangle(((0, 0), (1, 1), (2, 2)))


def test_triangle_circumcenter_test_right_angle_counts_as_inside():
    assert Triangle(((0, 0), (1, 0), (0, 1))).contains_circumcenter()
    assert not Triangle(((0, 0), (3, 0), (1, 0.3))).contains_circumcenter()


def test_lattice_domain_locate_and_boundary():
    q = LatticeDomain.from_cells(0.5, [(1, 1), (2, 1)])
    assert q.locate(Fraction(1), Fraction(1, 2)) == "interior"
    assert q.locate(Fraction(0), Fraction(1, 2)) == "boundary"
    assert q.locate(Fraction(3), Fraction(3)) == "exterior"
    assert sorted(q.boundary_indices()) == [(0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1)]
    assert math.isclose(q.area, 0.5)


def test_lattice_domain_rejects_corner_contact():
    with pytest.raises(InvalidDomain):
        LatticeDomain.from_cells(1.0, [(1, 1), (2, 2)])


def test_lattice_json_roundtrip(tmp_path):
    q = LatticeDomain.from_cells(0.25, [(1, 1), (1, 2), (2, 2)])
    assert LatticeDomain.from_json(q.to_json()) == q
    path = tmp_path / "q.json"
    path.write_text(json.dumps(q.to_json()))
    assert LatticeDomain.from_json(path) == q


def test_classified_interior_triangles_tile_the_domain():
    cells = [(i, j) for i in range(1, 5) for j in range(1, 4)] + [(5, 1), (5, 2), (6, 1)]
    q = LatticeDomain.from_cells(1.0, cells)
    bm = classify_triangles(q)
    areas = bm.mesh.areas()
    assert math.isclose(areas[bm.interior].sum(), q.area, rel_tol=1e-12)


def test_hex_lattice_spacing_and_vertex_degree():
    side = 0.3
    c = hex_centers(side, (-2, -2, 2, 2))
    d = np.hypot(c[:, None, 0] - c[None, :, 0], c[:, None, 1] - c[None, :, 1])
    np.fill_diagonal(d, np.inf)
    assert np.allclose(d.min(axis=1), side * math.sqrt(3), rtol=1e-12)
    tiling = hex_tiling(side, (-2, -2, 2, 2))
    inner = tiling.vertices[np.all(np.abs(tiling.vertices) < 1.0, axis=1)]
    dv = np.hypot(inner[:, None, 0] - c[None, :, 0], inner[:, None, 1] - c[None, :, 1])
    assert np.all(np.sum(np.isclose(dv, side, rtol=1e-9), axis=1) == 3)
    assert math.isclose(tiling.cell_area, 1.5 * math.sqrt(3) * side ** 2)
