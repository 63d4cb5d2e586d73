"""Distance fields and the mean-to-max efficiency of distance functions.

Two boundaries are handled separately: the full boundary of a domain
(segment or analytic distance) and the discrete boundary of a lattice domain
(distance to a finite point set).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np
from scipy.spatial import cKDTree

from .domains import (
    DomainDescriptor,
    GridMask,
    honeycomb_perforated,
    lattice,
    rasterize,
    segment_distance,
)
from .energy import HONEYCOMB_CONSTANT, energy, sector_integral, triangle_quadrature
from .errors import DegenerateBoundary, EmptyDomain, ResolutionTooCoarse
from .geometry import BoundaryMesh, LatticeDomain, Point, classify_triangles, clip_polygon, orient


@dataclass(frozen=True)
class ScalarField:
    """Cell-centred samples; ``values`` vanish off ``mask``."""

    origin: tuple
    spacing: float
    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.mask.shape:
            raise ValueError("values and mask shapes differ")

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.values.ndim

    def integral(self) -> float:
        return float(self.values[self.mask].sum()) * self.cell_volume

    def mean(self) -> float:
        return float(self.values[self.mask].mean())

    def max(self) -> float:
        return float(self.values[self.mask].max())

    def to_json(self) -> dict:
        return {"origin": list(self.origin), "spacing": self.spacing,
                "values": self.values.tolist(), "mask": self.mask.astype(int).tolist()}


@dataclass(frozen=True)
class EfficiencyReport:
    mean: float
    max: float
    ratio: float
    method: str  # "analytic", "grid" or "delaunay_exact"
    resolution: float | None = None
    extra: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_mean_max(cls, mean: float, mx: float, method: str, resolution=None, **extra):
        if not mx > 0:
            raise EmptyDomain("maximum of the distance function is not positive")
        return cls(float(mean), float(mx), float(mean) / float(mx), method,
                   None if resolution is None else float(resolution), extra)

    def to_json(self) -> dict:
        return {"mean": self.mean, "max": self.max, "ratio": self.ratio,
                "method": self.method, "resolution": self.resolution}


# ---------------------------------------------------------------------------
# Continuous-boundary distance
# ---------------------------------------------------------------------------


def distance_field(domain: DomainDescriptor | LatticeDomain, h: float) -> ScalarField:
    """Exact distance to the complement sampled at the cell centres of a grid."""
    if isinstance(domain, LatticeDomain):
        domain = lattice(domain)
    try:
        g = rasterize(domain, h)
    except Exception as exc:
        if exc.__class__.__name__ == "EmptyResult":
            raise EmptyDomain(str(exc)) from exc
        raise
    return field_on_grid(domain, g)


def field_on_grid(domain: DomainDescriptor, g: GridMask) -> ScalarField:
    values = np.zeros(g.shape)
    X = g.masked_centers()
    values[g.mask] = np.maximum(domain.signed_distance(X), 0.0)
    return ScalarField(g.origin, g.spacing, values, g.mask)


def phi_infinity(domain: DomainDescriptor | LatticeDomain, h: float) -> EfficiencyReport:
    """Mean over max of the distance to the complement.

    The mean is a midpoint rule over the cells whose centres are inside; the
    max is the closed-form inradius when the kind has one, else the grid max.
    """
    if isinstance(domain, LatticeDomain):
        domain = lattice(domain)
    f = distance_field(domain, h)
    mean = f.mean()
    inr = domain.inradius
    if inr is not None:
        return EfficiencyReport.from_mean_max(mean, inr, "analytic", h)
    return EfficiencyReport.from_mean_max(mean, f.max(), "grid", h)


# ---------------------------------------------------------------------------
# Discrete-boundary distance on lattice domains
# ---------------------------------------------------------------------------


def _boundary_points(q: LatticeDomain) -> np.ndarray:
    pts = np.array(q.boundary_indices(), dtype=float) * q.eps
    if len(pts) < 3:
        raise DegenerateBoundary("fewer than three discrete boundary points")
    a = pts[0]
    if all(abs(orient(a, pts[1], p)) == 0.0 for p in pts[2:]):
        raise DegenerateBoundary("discrete boundary points are collinear")
    return pts


def discrete_distance(q: LatticeDomain, x: np.ndarray) -> np.ndarray:
    """Distance from points ``x`` to the discrete boundary point set of ``q``."""
    d, _ = cKDTree(_boundary_points(q)).query(np.asarray(x, dtype=float).reshape(-1, 2))
    return d


def lattice_grid(q: LatticeDomain, h: float) -> np.ndarray:
    """Cell centres of a sub-grid of spacing h = eps/k restricted to ``q``."""
    k = int(round(q.eps / h))
    if k < 1 or not math.isclose(k * h, q.eps, rel_tol=1e-9):
        raise ResolutionTooCoarse(f"h={h} must divide eps={q.eps}")
    off = (np.arange(k) + 0.5) / k
    U, V = np.meshgrid(off, off, indexing="ij")
    local = np.stack([U.ravel(), V.ravel()], axis=1)
    cells = np.array(sorted(q.cells), dtype=float)
    pts = (cells[:, None, :] - 1.0 + local[None, :, :]).reshape(-1, 2)
    return pts * q.eps


def polygon_distance_integral(site, poly: np.ndarray) -> float:
    """Exact integral of ``|x - site|`` over a convex polygon (any site position)."""
    total = 0.0
    n = len(poly)
    for k in range(n):
        p, r = poly[k], poly[(k + 1) % n]
        o = orient(site, p, r)
        if o != 0.0:
            total += math.copysign(sector_integral(site, p, r), o)
    return abs(total)


def voronoi_integral(q: LatticeDomain) -> float:
    """Exact integral over ``q`` of the distance to the discrete boundary.

    Each lattice cell is split by the Voronoi diagram of the nearby boundary
    points and the distance is integrated in polar form on every piece.
    """
    sites = _boundary_points(q)
    tree = cKDTree(sites)
    eps = q.eps
    total = 0.0
    for i, j in sorted(q.cells):
        lo = np.array([(i - 1) * eps, (j - 1) * eps])
        square = np.array([lo, lo + [eps, 0.0], lo + [eps, eps], lo + [0.0, eps]])
        c = lo + eps / 2
        d0, _ = tree.query(c)
        cand = tree.query_ball_point(c, d0 + math.sqrt(2.0) * eps + 1e-12 * eps)
        for a in cand:
            s = sites[a]
            poly = square
            for b in cand:
                if b == a:
                    continue
                t = sites[b]
                poly = clip_polygon(poly, t - s, 0.5 * (t @ t - s @ s))
                if len(poly) < 3:
                    break
            if len(poly) >= 3:
                total += polygon_distance_integral(s, poly)
    return total


@dataclass(frozen=True)
class DiscreteEfficiency:
    """Discrete-boundary efficiency with both exact evaluations.

    ``integral`` is the exact Voronoi integral; ``delaunay_integral`` is the
    sum of vertex-distance integrals over interior Delaunay triangles, which
    bounds it from above and coincides with it when every point's nearest
    boundary point is a vertex of its own triangle.
    """

    report: EfficiencyReport
    integral: float
    delaunay_integral: float
    grid_integral: float
    grid_h: float
    center: Point
    radius: float

    @property
    def grid_relative_error(self) -> float:
        return abs(self.integral - self.grid_integral) / self.integral

    @property
    def delaunay_grid_relative_error(self) -> float:
        return abs(self.delaunay_integral - self.grid_integral) / self.delaunay_integral

    @property
    def delaunay_ratio(self) -> float:
        return self.delaunay_integral / (self.report.max * self.domain_area)

    @property
    def domain_area(self) -> float:
        return self.report.extra["area"]


def _interior_mesh(q: LatticeDomain) -> BoundaryMesh:
    _boundary_points(q)
    return classify_triangles(q)


def largest_empty_circle(q: LatticeDomain, bm: BoundaryMesh | None = None) -> tuple[Point, float]:
    """Point of ``q`` farthest from the discrete boundary, with that distance.

    The farthest point is a Voronoi vertex of the boundary points, i.e. a
    Delaunay circumcentre; candidates are the circumcentres lying in ``q``.
    Points on the boundary of ``q`` are within eps/2 of a boundary point,
    below the smallest lattice circumradius eps/sqrt(2).
    """
    if bm is None:
        bm = _interior_mesh(q)
    centers, radii = bm.mesh.circumcircles()
    best = -1.0
    best_c = None
    order = np.argsort(-radii, kind="stable")
    for t in order:
        if radii[t] <= best:
            break
        c = centers[t]
        if q.contains(float(c[0]), float(c[1])):
            best, best_c = float(radii[t]), c
    if best_c is None:
        raise DegenerateBoundary("no circumcentre lies inside the domain")
    return Point(float(best_c[0]), float(best_c[1])), best


def phi_d_infinity(q: LatticeDomain, grid_h: float | None = None,
                   check_grid: bool = True) -> DiscreteEfficiency:
    """Efficiency of the distance to the discrete boundary, evaluated exactly.

    The integral is the exact Voronoi integral; the interior Delaunay triangle
    sum is reported alongside, and ``method`` is ``delaunay_exact`` when the
    two agree. A midpoint-grid evaluation at ``grid_h`` (default eps/8) is a
    further cross-check.
    """
    bm = _interior_mesh(q)
    mesh = bm.mesh
    tri_total = 0.0
    area = 0.0
    for t in bm.interior.tolist():
        rep = energy(mesh.triangle(t))
        tri_total += rep.vertex_integral
        area += rep.area
    if not math.isclose(area, q.area, rel_tol=1e-9):
        raise DegenerateBoundary(f"interior triangles cover {area}, domain area {q.area}")
    exact = voronoi_integral(q)
    center, radius = largest_empty_circle(q, bm)
    grid_h = q.eps / 8 if grid_h is None else grid_h
    grid_total = float("nan")
    if check_grid:
        pts = lattice_grid(q, grid_h)
        grid_total = float(discrete_distance(q, pts).sum()) * grid_h ** 2
    # the triangle sum is exact only when it matches the Voronoi integral
    method = "delaunay_exact" if math.isclose(tri_total, exact, rel_tol=1e-10) else "voronoi_exact"
    rep = EfficiencyReport.from_mean_max(exact / q.area, radius, method, None, area=q.area)
    return DiscreteEfficiency(rep, exact, tri_total, grid_total, grid_h, center, radius)


def grid_max_discrete(q: LatticeDomain, h: float) -> float:
    pts = lattice_grid(q, h)
    bpts = np.array(q.boundary_indices(), dtype=float) * q.eps
    # include the sub-grid corners too so lattice-aligned maxima are sampled
    k = int(round(q.eps / h))
    corners = pts - h / 2
    allp = np.concatenate([pts, corners])
    return float(cKDTree(bpts).query(allp)[0].max()) if k else 0.0


@dataclass(frozen=True)
class NearestCheck:
    ok: bool
    samples: int
    counterexample: dict | None = None

    def __bool__(self) -> bool:
        return self.ok


def nearest_is_vertex_check(q: LatticeDomain, samples: int = 10_000,
                            rng: np.random.Generator | None = None) -> NearestCheck:
    """Check that inside each interior triangle the nearest boundary point is a vertex."""
    rng = np.random.default_rng(0) if rng is None else rng
    bm = _interior_mesh(q)
    mesh = bm.mesh
    tris = mesh.triangles[bm.interior]
    areas = mesh.areas()[bm.interior]
    pick = rng.choice(len(tris), size=samples, p=areas / areas.sum())
    r1 = np.sqrt(rng.random(samples))
    r2 = rng.random(samples)
    A = mesh.sites[tris[pick, 0]]
    B = mesh.sites[tris[pick, 1]]
    C = mesh.sites[tris[pick, 2]]
    X = (1 - r1)[:, None] * A + (r1 * (1 - r2))[:, None] * B + (r1 * r2)[:, None] * C
    d_all, j = cKDTree(mesh.sites).query(X)
    d_vert = np.min(np.stack([np.hypot(*(X - V).T) for V in (A, B, C)]), axis=0)
    bad = np.nonzero(d_vert - d_all > 1e-10)[0]
    if len(bad):
        k = int(bad[0])
        return NearestCheck(False, samples, {"point": X[k].tolist(), "triangle": tris[pick[k]].tolist(),
                                             "nearest_site": mesh.sites[j[k]].tolist(),
                                             "gap": float(d_vert[k] - d_all[k])})
    return NearestCheck(True, samples)


@dataclass(frozen=True)
class SqueezeCheck:
    max_lower_violation: float
    max_upper_violation: float

    @property
    def ok(self) -> bool:
        return self.max_lower_violation <= 1e-12 and self.max_upper_violation <= 1e-12


def squeeze_check(q: LatticeDomain, samples: int = 2000,
                  rng: np.random.Generator | None = None) -> SqueezeCheck:
    """Pointwise d_cont <= d_disc and d_disc^2 <= d_cont^2 + eps^2/2 inside ``q``."""
    rng = np.random.default_rng(0) if rng is None else rng
    cells = np.array(sorted(q.cells), dtype=float)
    pick = cells[rng.integers(len(cells), size=samples)]
    X = (pick - 1.0 + rng.random((samples, 2))) * q.eps
    dc = segment_distance(X, q.boundary_segments())
    dd = discrete_distance(q, X)
    return SqueezeCheck(float(np.max(dc - dd)), float(np.max(dd ** 2 - dc ** 2 - q.eps ** 2 / 2)))


# ---------------------------------------------------------------------------
# Honeycomb perforation
# ---------------------------------------------------------------------------


def honeycomb_phi_infinity(R: float, eps: float, h: float | None = None,
                           variant: str = "centers") -> EfficiencyReport:
    """Efficiency of the distance function on a disc minus a hexagonal point lattice.

    The distance is ``min(R - |x|, distance to the removed points)``, averaged
    with the midpoint rule over the disc. Away from the outer boundary layer
    the maximum equals the hexagon circumradius ``eps`` for both variants,
    which is used when such a Voronoi vertex exists inside the disc.
    """
    h = eps / 16 if h is None else h
    if h > eps / 8 * (1 + 1e-12):
        raise ResolutionTooCoarse(f"h={h} exceeds eps/8={eps / 8}")
    d = honeycomb_perforated(R, eps, variant)
    f = distance_field(d, h)
    mean = f.mean()
    gmax = f.max()
    # Voronoi vertices of the removed set: tiling vertices for centres and
    # tiling centres for vertices; all at distance eps from their sites.
    mx = eps if R - _nearest_center_radius(eps, variant) >= eps else gmax
    return EfficiencyReport.from_mean_max(mean, max(mx, gmax), "grid", h,
                                          variant=variant, R=R, eps=eps, grid_max=gmax)


def _nearest_center_radius(eps: float, variant: str) -> float:
    # distance from the origin to the closest Voronoi vertex of the removed set
    return eps if variant == "centers" else 0.0


def hexagon_mean_radius_closed() -> float:
    """Mean of |x| over a regular hexagon of circumradius 1, via six equilateral triangles."""
    s3 = math.sqrt(3.0)
    total = 0.0
    area = 0.0
    for k in range(6):
        a0, a1 = k * math.pi / 3, (k + 1) * math.pi / 3
        total += sector_integral((0.0, 0.0), (math.cos(a0), math.sin(a0)), (math.cos(a1), math.sin(a1)))
        area += s3 / 4
    return total / area


def hexagon_mean_radius_quadrature(tol: float = 1e-8) -> float:
    total = 0.0
    for k in range(6):
        a0, a1 = k * math.pi / 3, (k + 1) * math.pi / 3
        V = np.array([[0.0, 0.0], [math.cos(a0), math.sin(a0)], [math.cos(a1), math.sin(a1)]])
        total += triangle_quadrature(lambda P: np.hypot(P[:, 0], P[:, 1]), V, tol)
    return total / (6 * math.sqrt(3.0) / 4)


def write_sweep_csv(rows: Iterable[tuple[float, float, float]], fh: TextIO,
                    limit: float = HONEYCOMB_CONSTANT) -> None:
    """Rows ``(eps, h, ratio)``; the gap to ``limit`` is appended."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["eps", "h", "ratio", "limit_gap"])
    for eps, h, ratio in sorted(rows, key=lambda r: -r[0]):
        w.writerow([f"{eps:.12g}", f"{h:.12g}", f"{ratio:.12g}", f"{limit - ratio:.12g}"])
