"""Planar geometry: predicates, Delaunay/Voronoi, lattice domains, hex tilings.

Predicates are floating point with explicit tolerance bands. Inputs in this
package are either lattice points (exact in binary when the lattice is
integer) or O(1)-scaled random points, for which the bands below are ample.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    ClassificationConflict,
    CollinearInput,
    DegenerateTriangle,
    DuplicateSites,
    InvalidDomain,
)

AREA_TOL = 1e-14
INCIRCLE_TOL = 1e-10
ORIENT_TOL = 1e-13


@dataclass(frozen=True, slots=True)
class Point:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite point ({self.x}, {self.y})")

    def __iter__(self):
        yield self.x
        yield self.y

    def __getitem__(self, i):
        return (self.x, self.y)[i]

    def __len__(self):
        return 2


def as_points(pts) -> np.ndarray:
    """Coerce Points, pairs or an (n, 2) array to a float array of shape (n, 2)."""
    arr = np.array([tuple(p) for p in pts] if not isinstance(pts, np.ndarray) else pts,
                   dtype=float)
    if arr.size == 0:
        return arr.reshape(0, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("points must have shape (n, 2)")
    if not np.all(np.isfinite(arr)):
        raise ValueError("points must be finite")
    return arr


def orient(a, b, c) -> float:
    """Twice the signed area of (a, b, c); positive when counterclockwise."""
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def incircle_det(a, b, c, d) -> float:
    """Lifted in-circle determinant; positive iff d is inside circle(a, b, c) for ccw abc."""
    adx, ady = a[0] - d[0], a[1] - d[1]
    bdx, bdy = b[0] - d[0], b[1] - d[1]
    cdx, cdy = c[0] - d[0], c[1] - d[1]
    ad = adx * adx + ady * ady
    bd = bdx * bdx + bdy * bdy
    cd = cdx * cdx + cdy * cdy
    return (adx * (bdy * cd - bd * cdy)
            - ady * (bdx * cd - bd * cdx)
            + ad * (bdx * cdy - bdy * cdx))


def _incircle_scale(a, b, c, d) -> float:
    return max(math.dist(a, d), math.dist(b, d), math.dist(c, d), math.dist(a, b))


def circumcircle_of(a, b, c) -> tuple[tuple[float, float], float]:
    """Circumcenter and circumradius of three points (no degeneracy check)."""
    bx, by = b[0] - a[0], b[1] - a[1]
    cx, cy = c[0] - a[0], c[1] - a[1]
    d = 2.0 * (bx * cy - by * cx)
    b2 = bx * bx + by * by
    c2 = cx * cx + cy * cy
    ux = (cy * b2 - by * c2) / d
    uy = (bx * c2 - cx * b2) / d
    r = math.sqrt(ux * ux + uy * uy)
    return (a[0] + ux, a[1] + uy), r


@dataclass(frozen=True)
class Triangle:
    """Nondegenerate triangle with counterclockwise vertices.

    ``side_lengths[i]`` is the length of the side opposite ``vertices[i]``.
    """

    vertices: tuple[Point, Point, Point]
    side_lengths: tuple[float, float, float] = field(init=False)
    circumcenter: Point = field(init=False)
    circumradius: float = field(init=False)

    def __post_init__(self):
        a, b, c = (Point(*map(float, v)) for v in self.vertices)
        scale = max(math.dist(a, b), math.dist(b, c), math.dist(c, a))
        o = orient(a, b, c)
        if scale == 0.0 or abs(o) / 2.0 <= AREA_TOL * scale * scale:
            raise DegenerateTriangle(f"degenerate triangle {tuple(a)}, {tuple(b)}, {tuple(c)}")
        if o < 0:
            b, c = c, b
        object.__setattr__(self, "vertices", (a, b, c))
        object.__setattr__(self, "side_lengths",
                           (math.dist(b, c), math.dist(c, a), math.dist(a, b)))
        center, r = circumcircle_of(a, b, c)
        object.__setattr__(self, "circumcenter", Point(*center))
        object.__setattr__(self, "circumradius", r)

    @classmethod
    def from_points(cls, a, b, c) -> "Triangle":
        return cls((a, b, c))

    @classmethod
    def from_sides(cls, l1: float, l2: float, l3: float) -> "Triangle":
        """Place a triangle with the given side lengths (l_i opposite vertex i)."""
        if min(l1, l2, l3) <= 0:
            raise DegenerateTriangle("side lengths must be positive")
        # vertex 0 at origin, vertex 1 on the x axis: |v0 v1| = l3, |v0 v2| = l2
        x = (l3 * l3 + l2 * l2 - l1 * l1) / (2.0 * l3)
        y2 = l2 * l2 - x * x
        if y2 <= 0:
            raise DegenerateTriangle(f"sides ({l1}, {l2}, {l3}) violate the triangle inequality")
        return cls(((0.0, 0.0), (l3, 0.0), (x, math.sqrt(y2))))

    @property
    def area(self) -> float:
        a, b, c = self.vertices
        return 0.5 * orient(a, b, c)

    @property
    def scale(self) -> float:
        return max(self.side_lengths)

    def array(self) -> np.ndarray:
        return np.array([tuple(v) for v in self.vertices])

    def angles(self) -> tuple[float, float, float]:
        l1, l2, l3 = self.side_lengths

        def ang(opp, s1, s2):
            return math.acos(max(-1.0, min(1.0, (s1 * s1 + s2 * s2 - opp * opp) / (2 * s1 * s2))))

        return ang(l1, l2, l3), ang(l2, l3, l1), ang(l3, l1, l2)

    def contains_circumcenter(self, rel_tol: float = 1e-12) -> bool:
        """True when the circumcenter lies in the closed triangle (acute or right)."""
        l = sorted(self.side_lengths)
        return l[2] ** 2 <= (l[0] ** 2 + l[1] ** 2) * (1.0 + rel_tol)

    def scaled(self, factor: float, about=(0.0, 0.0)) -> "Triangle":
        ox, oy = about
        return Triangle(tuple((ox + factor * (v.x - ox), oy + factor * (v.y - oy))
                              for v in self.vertices))

    def transformed(self, angle: float, shift=(0.0, 0.0)) -> "Triangle":
        c, s = math.cos(angle), math.sin(angle)
        return Triangle(tuple((c * v.x - s * v.y + shift[0], s * v.x + c * v.y + shift[1])
                              for v in self.vertices))


def circumcircle(t: Triangle) -> tuple[Point, float]:
    return t.circumcenter, t.circumradius


def in_circumcircle(t: Triangle, p) -> str:
    """Classify ``p`` as ``"inside"``, ``"on"`` or ``"outside"`` the circumcircle of ``t``."""
    a, b, c = t.vertices
    p = (float(p[0]), float(p[1]))
    det = incircle_det(a, b, c, p)
    tol = INCIRCLE_TOL * _incircle_scale(a, b, c, p) ** 4
    if det > tol:
        return "inside"
    if det < -tol:
        return "outside"
    return "on"


# ---------------------------------------------------------------------------
# Delaunay triangulation (Bowyer-Watson with ghost triangles)
# ---------------------------------------------------------------------------

_GHOST = -1


class _BowyerWatson:
    """Incremental triangulator.

    The unbounded face is covered by ghost triangles ``(b, a, GHOST)``, one per
    counterclockwise hull edge ``(a, b)``; a point conflicts with a ghost when it
    lies strictly outside that hull edge (or on its open segment). This replaces
    the usual super-triangle, whose finite size can drop hull edges.
    """

    def __init__(self, pts: np.ndarray):
        self.pts = [tuple(p) for p in pts.tolist()]
        self.tris: dict[int, tuple[int, int, int]] = {}
        self.edge: dict[tuple[int, int], int] = {}
        self._next = 0
        self.last = -1

    def _add(self, a, b, c):
        tid = self._next
        self._next += 1
        self.tris[tid] = (a, b, c)
        self.edge[(a, b)] = tid
        self.edge[(b, c)] = tid
        self.edge[(c, a)] = tid
        self.last = tid
        return tid

    def _remove(self, tid):
        a, b, c = self.tris.pop(tid)
        for e in ((a, b), (b, c), (c, a)):
            if self.edge.get(e) == tid:
                del self.edge[e]

    def _orient_tol(self, a, b, c):
        s = max(math.dist(a, b), math.dist(b, c), math.dist(a, c))
        return ORIENT_TOL * s * s

    def _conflict(self, tid, k) -> bool:
        a, b, c = self.tris[tid]
        p = self.pts[k]
        if _GHOST in (a, b, c):
            # rotate so the ghost is last: (u, v, GHOST) with real edge u -> v;
            # the real triangle sits on the right of u -> v.
            while c != _GHOST:
                a, b, c = b, c, a
            u, v = self.pts[a], self.pts[b]
            o = orient(u, v, p)
            tol = self._orient_tol(u, v, p)
            if o > tol:
                return True
            if o < -tol:
                return False
            dx, dy = v[0] - u[0], v[1] - u[1]
            t = ((p[0] - u[0]) * dx + (p[1] - u[1]) * dy) / (dx * dx + dy * dy)
            return 0.0 < t < 1.0
        pa, pb, pc = self.pts[a], self.pts[b], self.pts[c]
        det = incircle_det(pa, pb, pc, p)
        return det > INCIRCLE_TOL * _incircle_scale(pa, pb, pc, p) ** 4

    def _locate(self, k) -> int:
        p = self.pts[k]
        tid = self.last if self.last in self.tris else next(iter(self.tris))
        for _ in range(4 * len(self.tris) + 16):
            a, b, c = self.tris[tid]
            if _GHOST in (a, b, c):
                if self._conflict(tid, k):
                    return tid
                while c != _GHOST:
                    a, b, c = b, c, a
                tid = self.edge[(b, a)]
                continue
            moved = False
            for u, v in ((a, b), (b, c), (c, a)):
                if orient(self.pts[u], self.pts[v], p) < 0:
                    tid = self.edge[(v, u)]
                    moved = True
                    break
            if not moved:
                return tid
        for tid in self.tris:  # pragma: no cover - walk fallback
            if self._conflict(tid, k):
                return tid
        raise RuntimeError("point location failed")

    def insert(self, k):
        seed = self._locate(k)
        if not self._conflict(seed, k):
            a, b, c = self.tris[seed]
            near = min((v for v in (a, b, c) if v != _GHOST),
                       key=lambda v: math.dist(self.pts[v], self.pts[k]))
            raise DuplicateSites(f"site {k} coincides with site {near}")
        cavity = {seed}
        stack = [seed]
        while stack:
            tid = stack.pop()
            a, b, c = self.tris[tid]
            for u, v in ((a, b), (b, c), (c, a)):
                nb = self.edge.get((v, u))
                if nb is not None and nb not in cavity and self._conflict(nb, k):
                    cavity.add(nb)
                    stack.append(nb)
        p = self.pts[k]
        while True:
            boundary = []
            grow = None
            for tid in cavity:
                a, b, c = self.tris[tid]
                for u, v in ((a, b), (b, c), (c, a)):
                    nb = self.edge.get((v, u))
                    if nb in cavity:
                        continue
                    if u != _GHOST and v != _GHOST:
                        pu, pv = self.pts[u], self.pts[v]
                        if orient(pu, pv, p) <= self._orient_tol(pu, pv, p):
                            grow = nb
                            break
                    boundary.append((u, v))
                if grow is not None:
                    break
            if grow is None:
                break
            if grow is None or grow in cavity:  # pragma: no cover
                raise RuntimeError("cavity repair failed")
            cavity.add(grow)
        for tid in cavity:
            self._remove(tid)
        for u, v in boundary:
            self._add(u, v, k)


@dataclass(frozen=True)
class DelaunayMesh:
    """Delaunay triangulation of ``sites``.

    ``triangles`` holds counterclockwise vertex-index triples; ``neighbors[t, i]``
    is the triangle across the edge opposite vertex ``i`` (-1 on the hull).
    """

    sites: np.ndarray
    triangles: np.ndarray
    neighbors: np.ndarray

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def triangle(self, t: int) -> Triangle:
        return Triangle(tuple(map(tuple, self.sites[self.triangles[t]])))

    def areas(self) -> np.ndarray:
        p = self.sites[self.triangles]
        return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                      - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))

    def circumcircles(self) -> tuple[np.ndarray, np.ndarray]:
        p = self.sites[self.triangles]
        a = p[:, 0]
        b = p[:, 1] - a
        c = p[:, 2] - a
        d = 2.0 * (b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0])
        b2 = (b * b).sum(1)
        c2 = (c * c).sum(1)
        ux = (c[:, 1] * b2 - b[:, 1] * c2) / d
        uy = (b[:, 0] * c2 - c[:, 0] * b2) / d
        return a + np.stack([ux, uy], 1), np.hypot(ux, uy)

    def edges(self) -> set[tuple[int, int]]:
        out = set()
        for a, b, c in self.triangles.tolist():
            for u, v in ((a, b), (b, c), (c, a)):
                out.add((min(u, v), max(u, v)))
        return out

    def to_json(self) -> dict:
        return {"sites": self.sites.tolist(), "triangles": self.triangles.tolist()}


def _neighbors(tris: list[tuple[int, int, int]]) -> np.ndarray:
    owner = {}
    for t, (a, b, c) in enumerate(tris):
        owner[(a, b)] = t
        owner[(b, c)] = t
        owner[(c, a)] = t
    nb = np.full((len(tris), 3), -1, dtype=int)
    for t, (a, b, c) in enumerate(tris):
        nb[t, 0] = owner.get((c, b), -1)
        nb[t, 1] = owner.get((a, c), -1)
        nb[t, 2] = owner.get((b, a), -1)
    return nb


def _canonical(tri):
    a, b, c = tri
    m = min(tri)
    if m == b:
        return (b, c, a)
    if m == c:
        return (c, a, b)
    return (a, b, c)


def _tie_break_flips(pts: list, tris: list[tuple[int, int, int]]) -> list[tuple[int, int, int]]:
    """Among co-circular quads keep the diagonal with the smallest index pair.

    Each flip replaces an edge by a lexicographically smaller one, so the loop
    terminates; co-circular flips keep every circumcircle, hence emptiness.
    """
    tris = [tuple(t) for t in tris]
    changed = True
    while changed:
        changed = False
        owner = {}
        for t, (a, b, c) in enumerate(tris):
            owner[(a, b)] = t
            owner[(b, c)] = t
            owner[(c, a)] = t
        for (u, v), t in sorted(owner.items()):
            if u > v:
                continue
            s = owner.get((v, u))
            if s is None:
                continue
            w = next(x for x in tris[t] if x not in (u, v))
            x = next(y for y in tris[s] if y not in (u, v))
            if (min(w, x), max(w, x)) >= (u, v):
                continue
            pu, pv, pw, px = pts[u], pts[v], pts[w], pts[x]
            det = incircle_det(pu, pv, pw, px)
            if abs(det) > INCIRCLE_TOL * _incircle_scale(pu, pv, pw, px) ** 4:
                continue
            # new triangles (w, x, v) and (x, w, u) must be proper
            if orient(pw, px, pv) <= 0 or orient(px, pw, pu) <= 0:
                continue
            tris[t] = (w, x, v)
            tris[s] = (x, w, u)
            changed = True
            break
    return tris


def delaunay_triangulate(sites, tie_break: bool = True) -> DelaunayMesh:
    """Delaunay triangulation of at least three non-collinear, distinct sites.

    Sites are inserted in the given order, so the result is deterministic.
    Co-circular groups are resolved by preferring the diagonal whose sorted
    vertex-index pair is lexicographically smallest.
    """
    pts = as_points(sites)
    n = len(pts)
    if n < 3:
        raise CollinearInput("need at least three sites")
    seen = {}
    for i, p in enumerate(map(tuple, pts.tolist())):
        if p in seen:
            raise DuplicateSites(f"sites {seen[p]} and {i} coincide")
        seen[p] = i
    bw = _BowyerWatson(pts)
    P = bw.pts
    i0, i1 = 0, 1
    i2 = None
    for k in range(2, n):
        if abs(orient(P[i0], P[i1], P[k])) > bw._orient_tol(P[i0], P[i1], P[k]):
            i2 = k
            break
    if i2 is None:
        raise CollinearInput("all sites are collinear")
    if orient(P[i0], P[i1], P[i2]) < 0:
        i1, i2 = i2, i1
    bw._add(i0, i1, i2)
    bw._add(i1, i0, _GHOST)
    bw._add(i2, i1, _GHOST)
    bw._add(i0, i2, _GHOST)
    first = {i0, i1, i2}
    for k in range(n):
        if k not in first:
            bw.insert(k)
    tris = [t for t in bw.tris.values() if _GHOST not in t]
    if tie_break:
        tris = _tie_break_flips(P, tris)
    tris = sorted(_canonical(t) for t in tris)
    arr = np.array(tris, dtype=int).reshape(-1, 3)
    return DelaunayMesh(pts, arr, _neighbors(tris))


def convex_hull_area(sites) -> float:
    pts = as_points(sites)
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and orient(out[-2], out[-1], p) <= 0:
                out.pop()
            out.append(tuple(p))
        return out

    lower = half(pts)
    upper = half(pts[::-1])
    hull = lower[:-1] + upper[:-1]
    x = np.array([h[0] for h in hull])
    y = np.array([h[1] for h in hull])
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


# ---------------------------------------------------------------------------
# Voronoi
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VoronoiCell:
    site: int
    vertices: np.ndarray  # counterclockwise loop
    bounded: bool


def clip_polygon(poly: np.ndarray, normal, offset: float) -> np.ndarray:
    """Keep the part of a convex polygon with ``normal . x <= offset``."""
    out = []
    n = len(poly)
    for i in range(n):
        p, q = poly[i], poly[(i + 1) % n]
        fp = normal[0] * p[0] + normal[1] * p[1] - offset
        fq = normal[0] * q[0] + normal[1] * q[1] - offset
        if fp <= 0:
            out.append(p)
        if fp * fq < 0:
            t = fp / (fp - fq)
            out.append(p + t * (q - p))
    return np.array(out).reshape(-1, 2)


def voronoi_cells_halfplane(sites, box) -> list[np.ndarray]:
    """Voronoi cells clipped to ``box = (xmin, ymin, xmax, ymax)`` by half-plane intersection."""
    pts = as_points(sites)
    x0, y0, x1, y1 = box
    square = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float)
    cells = []
    for i, p in enumerate(pts):
        poly = square
        for j, q in enumerate(pts):
            if i == j or len(poly) == 0:
                continue
            nrm = q - p
            off = 0.5 * (q @ q - p @ p)
            poly = clip_polygon(poly, nrm, off)
        cells.append(poly)
    return cells


def voronoi_dual(mesh_or_sites, far: float | None = None) -> list[VoronoiCell]:
    """Voronoi cells as the dual of a Delaunay mesh.

    Bounded cells are the loops of circumcenters of the incident triangles.
    Cells of hull sites are unbounded; they are truncated along their two
    rays at distance ``far`` (default: ten times the site span). Fewer than
    three sites, or collinear sites, fall back to half-plane clipping.
    """
    if isinstance(mesh_or_sites, DelaunayMesh):
        mesh = mesh_or_sites
    else:
        pts = as_points(mesh_or_sites)
        try:
            mesh = delaunay_triangulate(pts)
        except CollinearInput:
            return _voronoi_degenerate(pts, far)
    pts = mesh.sites
    span = float(np.ptp(pts, axis=0).max()) or 1.0
    far = 10.0 * span if far is None else far
    centers, _ = mesh.circumcircles()
    centroids = pts[mesh.triangles].mean(axis=1)
    incident: list[list[int]] = [[] for _ in range(len(pts))]
    for t, tri in enumerate(mesh.triangles.tolist()):
        for v in tri:
            incident[v].append(t)
    hull_next = {}
    for t, (a, b, c) in enumerate(mesh.triangles.tolist()):
        for k, (u, v) in enumerate(((b, c), (c, a), (a, b))):
            if mesh.neighbors[t, k] < 0:
                hull_next[u] = v  # ccw hull edge u -> v
    hull_prev = {v: u for u, v in hull_next.items()}
    cells = []
    for s, ts in enumerate(incident):
        p = pts[s]
        if not ts:
            cells.append(VoronoiCell(s, np.zeros((0, 2)), False))
            continue
        ang = [math.atan2(centroids[t][1] - p[1], centroids[t][0] - p[0]) for t in ts]
        if s in hull_next:
            # start the angular sweep at the outgoing hull edge
            w = pts[hull_next[s]]
            base = math.atan2(w[1] - p[1], w[0] - p[0])
            ang = [(a - base) % (2 * math.pi) for a in ang]
        order = [t for _, t in sorted(zip(ang, ts))]
        loop = [centers[t] for t in order]
        bounded = s not in hull_next
        if not bounded:
            w = pts[hull_next[s]]
            u = pts[hull_prev[s]]
            n_out = np.array([w[1] - p[1], -(w[0] - p[0])])
            n_in = np.array([p[1] - u[1], -(p[0] - u[0])])
            n_out /= np.linalg.norm(n_out)
            n_in /= np.linalg.norm(n_in)
            loop = loop + [loop[-1] + far * n_in, loop[0] + far * n_out]
        verts = [loop[0]]
        for q in loop[1:]:
            if np.linalg.norm(q - verts[-1]) > 1e-12 * span:
                verts.append(q)
        if len(verts) > 1 and np.linalg.norm(verts[0] - verts[-1]) <= 1e-12 * span:
            verts.pop()
        cells.append(VoronoiCell(s, np.array(verts), bounded))
    return cells


def _voronoi_degenerate(pts: np.ndarray, far):
    span = float(np.ptp(pts, axis=0).max()) if len(pts) > 1 else 1.0
    far = 10.0 * (span or 1.0) if far is None else far
    c = pts.mean(axis=0)
    box = (c[0] - far, c[1] - far, c[0] + far, c[1] + far)
    return [VoronoiCell(i, cell, False)
            for i, cell in enumerate(voronoi_cells_halfplane(pts, box))]


def polygon_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def is_convex(poly: np.ndarray, tol: float = 1e-9) -> bool:
    n = len(poly)
    if n < 3:
        return False
    scale = float(np.ptp(poly, axis=0).max()) or 1.0
    return all(orient(poly[i], poly[(i + 1) % n], poly[(i + 2) % n]) >= -tol * scale * scale
               for i in range(n))


def point_in_convex(poly: np.ndarray, p, tol: float = 0.0) -> bool:
    n = len(poly)
    return all(orient(poly[i], poly[(i + 1) % n], p) >= -tol for i in range(n))


# ---------------------------------------------------------------------------
# Lattice domains (finite unions of closed eps-squares)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LatticeDomain:
    """Union of closed squares ``eps*[i-1, i] x eps*[j-1, j]`` for ``(i, j)`` in ``cells``.

    Configurations where two cells touch only at a corner are rejected, so the
    boundary is a disjoint union of simple lattice loops.
    """

    eps: float
    cells: frozenset

    def __post_init__(self):
        cells = frozenset((int(i), int(j)) for i, j in self.cells)
        object.__setattr__(self, "cells", cells)
        if not (self.eps > 0 and math.isfinite(self.eps)):
            raise InvalidDomain("eps must be positive")
        if not cells:
            raise InvalidDomain("a lattice domain needs at least one cell")
        bad = corner_touching_vertices(cells)
        if bad:
            raise InvalidDomain(f"cells touch only at lattice vertex {bad[0]}")

    @classmethod
    def from_cells(cls, eps: float, cells: Iterable) -> "LatticeDomain":
        return cls(float(eps), frozenset(tuple(c) for c in cells))

    @property
    def area(self) -> float:
        return len(self.cells) * self.eps ** 2

    def vertex_status(self, a: int, b: int) -> str:
        """Classify lattice vertex ``(a, b)``: interior, boundary or exterior."""
        k = sum(c in self.cells for c in ((a, b), (a + 1, b), (a, b + 1), (a + 1, b + 1)))
        return "interior" if k == 4 else ("exterior" if k == 0 else "boundary")

    def boundary_indices(self) -> list[tuple[int, int]]:
        cand = set()
        for i, j in self.cells:
            cand.update(((i - 1, j - 1), (i, j - 1), (i - 1, j), (i, j)))
        return sorted(v for v in cand if self.vertex_status(*v) == "boundary")

    def boundary_segments(self) -> np.ndarray:
        """Unit boundary edges as an (m, 2, 2) array of endpoints (physical units)."""
        segs = []
        for i, j in self.cells:
            if (i - 1, j) not in self.cells:
                segs.append(((i - 1, j - 1), (i - 1, j)))
            if (i + 1, j) not in self.cells:
                segs.append(((i, j - 1), (i, j)))
            if (i, j - 1) not in self.cells:
                segs.append(((i - 1, j - 1), (i, j - 1)))
            if (i, j + 1) not in self.cells:
                segs.append(((i - 1, j), (i, j)))
        return self.eps * np.array(sorted(segs), dtype=float).reshape(-1, 2, 2)

    def bbox_indices(self) -> tuple[int, int, int, int]:
        ii = [c[0] for c in self.cells]
        jj = [c[1] for c in self.cells]
        return min(ii) - 1, min(jj) - 1, max(ii), max(jj)

    def locate(self, X: Fraction, Y: Fraction) -> str:
        """Exact classification of a point given in lattice units."""
        xs = _cells_on_axis(X)
        ys = _cells_on_axis(Y)
        hits = [(i, j) in self.cells for i in xs for j in ys]
        if all(hits):
            return "interior"
        return "boundary" if any(hits) else "exterior"

    def contains(self, x: float, y: float) -> bool:
        """Closed-set membership of a physical point."""
        return self.locate(Fraction(x) / Fraction(self.eps), Fraction(y) / Fraction(self.eps)) != "exterior"

    def contains_many(self, xy: np.ndarray, closed: bool = True) -> np.ndarray:
        """Vectorized membership; points on grid lines count as inside when ``closed``."""
        u = xy / self.eps
        cells = self.cells
        i = np.ceil(u[:, 0]).astype(int)
        j = np.ceil(u[:, 1]).astype(int)
        inside = np.array([(a, b) in cells for a, b in zip(i.tolist(), j.tolist())], dtype=bool)
        if closed:
            on_x = u[:, 0] == np.floor(u[:, 0])
            on_y = u[:, 1] == np.floor(u[:, 1])
            for k in np.nonzero(on_x | on_y)[0]:
                inside[k] = self.locate(Fraction(float(u[k, 0])), Fraction(float(u[k, 1]))) != "exterior"
        return inside

    def to_json(self) -> dict:
        return {"eps": self.eps, "cells": sorted([list(c) for c in self.cells])}

    @classmethod
    def from_json(cls, obj) -> "LatticeDomain":
        if isinstance(obj, (str, Path)):
            obj = json.loads(Path(obj).read_text())
        try:
            eps = float(obj["eps"])
            cells = [(int(c[0]), int(c[1])) for c in obj["cells"]]
            if any(len(c) != 2 for c in obj["cells"]):
                raise ValueError
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise InvalidDomain(f"malformed lattice domain: {exc!r}") from exc
        return cls(eps, frozenset(cells))


def _cells_on_axis(X: Fraction) -> tuple[int, ...]:
    # cell index i covers [i - 1, i]
    fl = math.floor(X)
    if X == fl:
        return (fl, fl + 1)
    return (fl + 1,)


def corner_touching_vertices(cells) -> list[tuple[int, int]]:
    cells = set(cells)
    bad = []
    cand = set()
    for i, j in cells:
        cand.update(((i - 1, j - 1), (i, j - 1), (i - 1, j), (i, j)))
    for a, b in sorted(cand):
        sw, se = (a, b) in cells, (a + 1, b) in cells
        nw, ne = (a, b + 1) in cells, (a + 1, b + 1) in cells
        if (sw and ne and not se and not nw) or (se and nw and not sw and not ne):
            bad.append((a, b))
    return bad


def discrete_boundary(q: LatticeDomain) -> list[Point]:
    """Lattice points on the topological boundary of ``q``."""
    return [Point(q.eps * a, q.eps * b) for a, b in q.boundary_indices()]


@dataclass(frozen=True)
class BoundaryMesh:
    """Delaunay mesh of the discrete boundary with its interior/exterior split."""

    domain: LatticeDomain
    mesh: DelaunayMesh
    interior: np.ndarray  # triangle indices inside the domain
    exterior: np.ndarray
    lattice_sites: list   # integer lattice coordinates of mesh.sites


def boundary_mesh(q: LatticeDomain) -> tuple[DelaunayMesh, list]:
    """Delaunay mesh of the discrete boundary, built in exact integer coordinates."""
    idx = q.boundary_indices()
    mesh = delaunay_triangulate(np.array(idx, dtype=float))
    return DelaunayMesh(mesh.sites * q.eps, mesh.triangles, mesh.neighbors), idx


def _segment_statuses(q: LatticeDomain, A, B) -> set[str]:
    """Statuses of the open sub-segments of A-B cut by lattice lines (exact)."""
    ts = {Fraction(0), Fraction(1)}
    for axis in (0, 1):
        a, b = A[axis], B[axis]
        if a != b:
            lo, hi = sorted((a, b))
            for k in range(math.ceil(lo), math.floor(hi) + 1):
                ts.add(Fraction(k - a, b - a))
    ts = sorted(ts)
    out = set()
    for t0, t1 in zip(ts, ts[1:]):
        t = (t0 + t1) / 2
        X = A[0] + t * (B[0] - A[0])
        Y = A[1] + t * (B[1] - A[1])
        out.add(q.locate(Fraction(X), Fraction(Y)))
    return out


def classify_triangles(q: LatticeDomain, mesh: DelaunayMesh | None = None,
                       lattice_sites=None) -> BoundaryMesh:
    """Split the Delaunay triangles of the discrete boundary into interior/exterior.

    Classification is by exact centroid membership; a verification pass then
    checks every triangle edge against the lattice boundary and raises
    ``ClassificationConflict`` if an edge crosses it.
    """
    if mesh is None:
        mesh, lattice_sites = boundary_mesh(q)
    elif lattice_sites is None:
        lattice_sites = [tuple(int(round(v / q.eps)) for v in s) for s in mesh.sites]
    L = [(Fraction(int(a)), Fraction(int(b))) for a, b in lattice_sites]
    interior, exterior = [], []
    for t, (a, b, c) in enumerate(mesh.triangles.tolist()):
        cx = (L[a][0] + L[b][0] + L[c][0]) / 3
        cy = (L[a][1] + L[b][1] + L[c][1]) / 3
        status = q.locate(cx, cy)
        if status == "boundary":
            raise ClassificationConflict(f"centroid of triangle {t} lies on the boundary")
        inside = status == "interior"
        bad = "exterior" if inside else "interior"
        for u, v in ((a, b), (b, c), (c, a)):
            if bad in _segment_statuses(q, L[u], L[v]):
                raise ClassificationConflict(f"edge ({u}, {v}) of triangle {t} crosses the boundary")
        (interior if inside else exterior).append(t)
    return BoundaryMesh(q, mesh, np.array(interior, dtype=int), np.array(exterior, dtype=int),
                        list(lattice_sites))


# ---------------------------------------------------------------------------
# Hexagonal tilings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HexTiling:
    """Regular hexagons of circumradius ``side`` (vertices at angles k*60 deg).

    ``centers`` is the triangular lattice of cell centers inside ``bbox``;
    ``vertices`` are the corners of those cells that lie inside ``bbox``.
    """

    side: float
    bbox: tuple[float, float, float, float]
    centers: np.ndarray
    vertices: np.ndarray

    @property
    def cell_area(self) -> float:
        return 1.5 * math.sqrt(3.0) * self.side ** 2


def hex_lattice_basis(side: float) -> np.ndarray:
    return side * np.array([[1.5, 0.5 * math.sqrt(3.0)], [0.0, math.sqrt(3.0)]])


def hex_centers(side: float, bbox) -> np.ndarray:
    x0, y0, x1, y1 = bbox
    a1, a2 = hex_lattice_basis(side)
    imax = int(math.ceil(max(abs(x0), abs(x1)) / a1[0])) + 2
    i = np.arange(-imax, imax + 1)
    pts = []
    for ii in i:
        base = ii * a1
        jlo = math.floor((y0 - base[1]) / a2[1]) - 1
        jhi = math.ceil((y1 - base[1]) / a2[1]) + 1
        j = np.arange(jlo, jhi + 1)
        pts.append(base + np.outer(j, a2))
    pts = np.concatenate(pts)
    keep = (pts[:, 0] >= x0) & (pts[:, 0] <= x1) & (pts[:, 1] >= y0) & (pts[:, 1] <= y1)
    pts = pts[keep]
    return pts[np.lexsort((pts[:, 0], pts[:, 1]))]


def hex_tiling(side: float, bbox) -> HexTiling:
    if not side > 0:
        raise ValueError("side must be positive")
    x0, y0, x1, y1 = map(float, bbox)
    if not (x1 > x0 and y1 > y0):
        raise ValueError("bbox must be nonempty")
    centers = hex_centers(side, (x0, y0, x1, y1))
    k = np.arange(6) * (math.pi / 3.0)
    offs = side * np.stack([np.cos(k), np.sin(k)], 1)
    verts = (centers[:, None, :] + offs[None, :, :]).reshape(-1, 2)
    keep = (verts[:, 0] >= x0) & (verts[:, 0] <= x1) & (verts[:, 1] >= y0) & (verts[:, 1] <= y1)
    verts = verts[keep]
    if len(verts):
        key = np.round(verts / (side * 1e-9)).astype(np.int64)
        _, first = np.unique(key, axis=0, return_index=True)
        verts = verts[np.sort(first)]
    return HexTiling(float(side), (x0, y0, x1, y1), centers, verts)


def points_to_json(pts) -> list:
    return as_points(pts).tolist()


def points_from_json(obj) -> np.ndarray:
    return as_points(obj)
