from __future__ import annotations

import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from torsimax import distance as dist
from torsimax import domains as dom
from torsimax import energy as en
from torsimax.errors import ResolutionTooCoarse
from torsimax.geometry import LatticeDomain, Triangle, classify_triangles

C = 1.0 / 3.0 + math.log(3.0) / 4.0
SQUARE_CORNER_MEAN = (math.sqrt(2.0) + math.log(1.0 + math.sqrt(2.0))) / 6.0


def square(n, eps=1.0):
    return LatticeDomain.from_cells(eps, [(i, j) for i in range(1, n + 1) for j in range(1, n + 1)])


L_SHAPE = LatticeDomain.from_cells(1.0, [(1, 1), (2, 1), (3, 1), (1, 2), (1, 3)])


def test_disc_ratio_one_third():
    rep = dist.phi_infinity(dom.disc(1.0), 1 / 256)
    assert rep.method == "analytic" and rep.max == 1.0
    assert abs(rep.ratio - 1 / 3) < 1e-4


def test_rectangle_ratio_closed_form():
    a, b = 2.0, 1.0
    rep = dist.phi_infinity(dom.rectangle(a, b), 1 / 200)
    assert abs(rep.ratio - (3 * a - b) / (6 * a)) < 1e-4


def test_interval_union_ratio():
    radii = [1.0, 0.5]
    rep = dist.phi_infinity(dom.interval_union(radii), 1e-4)
    expected = sum(r * r for r in radii) / (2 * sum(radii)) / max(radii)
    assert abs(rep.ratio - expected) < 1e-6


def test_distance_field_is_one_lipschitz():
    f = dist.distance_field(dom.disc_union(3), 1 / 64)
    v = np.where(f.mask, f.values, 0.0)
    for axis in (0, 1):
        assert np.max(np.abs(np.diff(v, axis=axis))) <= f.spacing * (1 + 1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 40), st.integers(0, 10_000))
def test_lattice_distance_field_matches_segment_brute_force(n_cells, seed):
    q = dom.random_polyomino(np.random.default_rng(seed), n_cells, eps=0.5)
    f = dist.distance_field(dom.lattice(q), 0.125)
    X = np.asarray(f.origin) + f.spacing * np.argwhere(f.mask)
    segs = q.boundary_segments()
    A, B = segs[:, 0], segs[:, 1]
    AB = B - A
    t = np.clip(np.einsum("nmk,mk->nm", X[:, None, :] - A[None], AB) / np.sum(AB * AB, axis=1), 0, 1)
    P = A[None] + t[..., None] * AB[None]
    brute = np.min(np.hypot(*(X[:, None, :] - P).transpose(2, 0, 1)), axis=1)
    assert np.allclose(f.values[f.mask], brute, atol=1e-12)


def test_single_cell_discrete_efficiency():
    q = LatticeDomain.from_cells(1.0, [(1, 1)])
    r = dist.phi_d_infinity(q)
    assert math.isclose(r.integral, SQUARE_CORNER_MEAN, rel_tol=1e-12)
    assert math.isclose(r.radius, 1 / math.sqrt(2), rel_tol=1e-12)
    right = en.energy(Triangle(((0, 0), (1, 0), (0, 1)))).energy
    assert math.isclose(r.report.ratio, right, rel_tol=1e-12)
    assert r.report.method == "delaunay_exact"


def test_domino_discrete_efficiency():
    q = LatticeDomain.from_cells(0.5, [(1, 1), (2, 1)])
    r = dist.phi_d_infinity(q)
    assert math.isclose(r.integral, 2 * SQUARE_CORNER_MEAN * 0.5 ** 3, rel_tol=1e-12)
    assert math.isclose(r.report.ratio, SQUARE_CORNER_MEAN * math.sqrt(2), rel_tol=1e-12)


def test_exact_integral_matches_fine_grid():
    q = dom.random_polyomino(np.random.default_rng(3), 30, eps=1.0)
    exact = dist.voronoi_integral(q)
    h = 1 / 64
    grid = float(dist.discrete_distance(q, dist.lattice_grid(q, h)).sum()) * h * h
    assert abs(exact - grid) / exact < 2 * h * h


def test_triangle_sum_bounds_exact_integral():
    rng = np.random.default_rng(4)
    for _ in range(10):
        q = dom.random_polyomino(rng, int(rng.integers(4, 40)))
        r = dist.phi_d_infinity(q, check_grid=False)
        assert r.delaunay_integral >= r.integral * (1 - 1e-12)
        assert r.report.ratio <= C + 1e-9


def test_nearest_vertex_property_holds_on_l_shape():
    chk = dist.nearest_is_vertex_check(L_SHAPE, 5000)
    assert chk and chk.counterexample is None
    r = dist.phi_d_infinity(L_SHAPE, check_grid=False)
    assert r.report.method == "delaunay_exact"


def test_nearest_vertex_property_fails_on_three_by_three():
    q = square(3)
    chk = dist.nearest_is_vertex_check(q, 20_000)
    assert not chk
    ce = chk.counterexample
    X = np.array(ce["point"])
    # the reported point is strictly closer to a boundary point outside its triangle
    sites = np.array(q.boundary_indices(), dtype=float)
    corners = classify_triangles(q).mesh.sites[ce["triangle"]]
    d_tri = np.min(np.hypot(*(corners - X).T))
    d_all = np.min(np.hypot(*(sites - X).T))
    assert d_tri - d_all > 1e-10
    r = dist.phi_d_infinity(q, check_grid=False)
    assert r.report.method == "voronoi_exact"
    assert r.delaunay_integral > r.integral


def test_squeeze_inequality():
    rng = np.random.default_rng(5)
    for _ in range(5):
        q = dom.random_polyomino(rng, 25, eps=0.3)
        assert dist.squeeze_check(q, 2000, rng).ok


def test_largest_empty_circle_matches_grid_maximum():
    rng = np.random.default_rng(6)
    for _ in range(5):
        q = dom.random_polyomino(rng, 30)
        _, radius = dist.largest_empty_circle(q)
        gmax = dist.grid_max_discrete(q, 1 / 16)
        assert gmax <= radius * (1 + 1e-12)
        assert radius - gmax < 1 / 16


def test_lattice_grid_requires_divisor():
    with pytest.raises(ResolutionTooCoarse):
        dist.lattice_grid(square(1), 0.3)


def test_hexagon_constant():
    assert abs(dist.hexagon_mean_radius_closed() - C) < 1e-14
    assert abs(dist.hexagon_mean_radius_quadrature(1e-8) - C) < 1e-6


def test_honeycomb_ratios_increase_toward_constant():
    ratios = [dist.honeycomb_phi_infinity(1.0, eps).ratio for eps in (0.2, 0.1)]
    assert ratios[0] < ratios[1] < C
    with pytest.raises(ResolutionTooCoarse):
        dist.honeycomb_phi_infinity(1.0, 0.2, h=0.1)


def test_sweep_csv_header():
    buf = io.StringIO()
    dist.write_sweep_csv([(0.2, 0.0125, 0.5)], buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "eps,h,ratio,limit_gap"
    assert float(lines[1].split(",")[3]) == pytest.approx(C - 0.5)
