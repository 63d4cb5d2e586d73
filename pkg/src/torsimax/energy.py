"""Triangle energy: mean distance to the vertex set over area times circumradius.

Three independent evaluation routes are provided:

* ``vertex_distance_integral_closed`` -- the inscribed-chord closed form, valid
  when the circumcenter lies in the closed triangle;
* ``vertex_distance_integral_sector`` -- exact polar integration over the
  Voronoi piece of each vertex, valid for every triangle;
* ``vertex_distance_integral_quadrature`` -- uniform midpoint refinement with
  Richardson extrapolation, used as the oracle for the other two.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Iterable, TextIO

import numpy as np
from scipy import optimize

from .errors import (
    DegenerateTriangle,
    DomainError,
    NotInscribable,
    NotObtuse,
    ObtuseTriangle,
    ToleranceNotReached,
)
from .geometry import Triangle, clip_polygon

HONEYCOMB_CONSTANT = 1.0 / 3.0 + math.log(3.0) / 4.0
MAX_QUADRATURE_DEPTH = 14


@dataclass(frozen=True)
class EnergyReport:
    triangle: Triangle
    vertex_integral: float
    area: float
    circumradius: float
    energy: float
    method: str  # "closed_form", "sector" or "quadrature"

    def row(self) -> dict:
        l1, l2, l3 = self.triangle.side_lengths
        return {"l1": l1, "l2": l2, "l3": l3, "area": self.area,
                "circumradius": self.circumradius, "energy": self.energy,
                "method": self.method}


def _chord_term(l: float) -> float:
    """l^3 * (sqrt(4 - l^2)/l^2 + ln((2 + s)/(2 - s))/4) for a chord of the unit circle."""
    s = math.sqrt(max(0.0, 4.0 - l * l))
    if s < 1e-13:
        return 0.0
    return l * s + 0.25 * l ** 3 * math.log((2.0 + s) / (2.0 - s))


def vertex_distance_integral_closed(t: Triangle) -> float:
    """Integral of the distance to the nearest vertex, for acute or right triangles."""
    if not t.contains_circumcenter():
        raise ObtuseTriangle("circumcenter lies outside the triangle")
    r = t.circumradius
    return r ** 3 * sum(_chord_term(l / r) for l in t.side_lengths) / 12.0


def sector_integral(apex, p, q) -> float:
    """Exact integral of ``|x - apex|`` over the triangle (apex, p, q)."""
    ax, ay = apex
    dx, dy = q[0] - p[0], q[1] - p[1]
    L = math.hypot(dx, dy)
    if L == 0.0:
        return 0.0
    ux, uy = dx / L, dy / L
    # foot of the perpendicular from apex onto the line pq
    s1 = (p[0] - ax) * ux + (p[1] - ay) * uy
    s2 = s1 + L
    h = abs((p[0] - ax) * uy - (p[1] - ay) * ux)
    if h == 0.0:
        return 0.0

    def prim(s):
        rho = math.hypot(h, s)
        return s * h * rho + h ** 3 * math.asinh(s / h)

    return (prim(s2) - prim(s1)) / 6.0


def vertex_distance_integral_sector(t: Triangle) -> float:
    """Integral of the distance to the nearest vertex, valid for any triangle."""
    V = t.array()
    total = 0.0
    for i in range(3):
        piece = V.copy()
        for j in range(3):
            if j != i:
                nrm = V[j] - V[i]
                piece = clip_polygon(piece, nrm, 0.5 * (V[j] @ V[j] - V[i] @ V[i]))
        # the piece is convex and has V[i] as a corner: fan from V[i]
        start = int(np.argmin(np.linalg.norm(piece - V[i], axis=1)))
        piece = np.roll(piece, -start, axis=0)
        for k in range(1, len(piece) - 1):
            total += sector_integral(V[i], piece[k], piece[k + 1])
    return total


def _ragged_arange(counts: np.ndarray) -> np.ndarray:
    """Concatenation of arange(c) for c in counts."""
    total = int(counts.sum())
    starts = np.repeat(np.cumsum(counts) - counts, counts)
    return np.arange(total) - starts


def _level_centroids(n: int, rows: slice):
    """Barycentric centroids of the n^2 congruent subtriangles, for a block of rows."""
    i = np.arange(n)[rows]
    up = n - i
    dn = n - i - 1
    a = np.concatenate([np.repeat(i + 1.0 / 3.0, up), np.repeat(i + 2.0 / 3.0, dn)])
    b = np.concatenate([_ragged_arange(up) + 1.0 / 3.0, _ragged_arange(dn) + 2.0 / 3.0])
    return a / n, b / n


def midpoint_rule(f: Callable[[np.ndarray], np.ndarray], vertices, level: int,
                  chunk: int = 1 << 20) -> float:
    """Centroid rule on the level-``level`` uniform 4-way subdivision of a triangle."""
    V = np.asarray(vertices, dtype=float)
    e1, e2 = V[1] - V[0], V[2] - V[0]
    area = 0.5 * abs(e1[0] * e2[1] - e1[1] * e2[0])
    n = 1 << level
    rows_per_chunk = max(1, chunk // n)
    acc = []
    for start in range(0, n, rows_per_chunk):
        a, b = _level_centroids(n, slice(start, start + rows_per_chunk))
        P = V[0] + np.outer(a, e1) + np.outer(b, e2)
        acc.append(float(np.sum(f(P))))
    return area * math.fsum(acc) / (n * n)


def triangle_quadrature(f, vertices, tol: float = 1e-7, min_level: int = 3,
                        max_level: int = MAX_QUADRATURE_DEPTH) -> float:
    """Refine until successive Richardson estimates agree to ``tol`` relatively.

    Two consecutive agreements are required: the kinks of a piecewise smooth
    integrand can make a single pair of levels agree by accident.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    prev_q = midpoint_rule(f, vertices, min_level - 1)
    prev_r = None
    agreed = 0
    for level in range(min_level, max_level + 1):
        q = midpoint_rule(f, vertices, level)
        r = (4.0 * q - prev_q) / 3.0
        if prev_r is not None and abs(r - prev_r) <= tol * abs(r):
            agreed += 1
            if agreed == 2:
                return r
        else:
            agreed = 0
        prev_q, prev_r = q, r
    raise ToleranceNotReached(f"no convergence to {tol} by depth {max_level}")


def _nearest_vertex_distance(V: np.ndarray):
    def f(P):
        d = np.hypot(P[:, 0] - V[0, 0], P[:, 1] - V[0, 1])
        for k in (1, 2):
            np.minimum(d, np.hypot(P[:, 0] - V[k, 0], P[:, 1] - V[k, 1]), out=d)
        return d
    return f


def vertex_distance_integral_quadrature(t: Triangle, tol: float = 1e-7) -> float:
    V = t.array()
    return triangle_quadrature(_nearest_vertex_distance(V), V, tol)


def energy(t: Triangle, method: str = "auto", tol: float = 1e-7) -> EnergyReport:
    """Scale-free triangle energy with its report.

    ``method="auto"`` uses the closed form when the circumcenter lies in the
    closed triangle and the exact sector integration otherwise.
    """
    if not isinstance(t, Triangle):
        t = Triangle(tuple(t))
    if method == "auto":
        method = "closed_form" if t.contains_circumcenter() else "sector"
    if method == "closed_form":
        integral = vertex_distance_integral_closed(t)
    elif method == "sector":
        integral = vertex_distance_integral_sector(t)
    elif method == "quadrature":
        integral = vertex_distance_integral_quadrature(t, tol)
    else:
        raise ValueError(f"unknown method {method!r}")
    area = t.area
    return EnergyReport(t, integral, area, t.circumradius,
                        integral / (area * t.circumradius), method)


def reflect_obtuse(t: Triangle) -> tuple[Triangle, Triangle]:
    """Reflect the obtuse vertex across the opposite side.

    For an obtuse angle at A with opposite side BC and reflection A', returns
    the isosceles triangles (A, B, A') and (A, C, A'). Both have circumradius
    at most that of ``t``.
    """
    angles = t.angles()
    k = int(np.argmax(angles))
    if angles[k] <= math.pi / 2 + 1e-12:
        raise NotObtuse("triangle has no obtuse angle")
    V = t.array()
    A, B, C = V[k], V[(k + 1) % 3], V[(k + 2) % 3]
    d = C - B
    foot = B + d * ((A - B) @ d) / (d @ d)
    A2 = 2.0 * foot - A
    t1 = Triangle((tuple(A), tuple(B), tuple(A2)))
    t2 = Triangle((tuple(A), tuple(C), tuple(A2)))
    r = t.circumradius
    assert t1.circumradius <= r * (1 + 1e-12) and t2.circumradius <= r * (1 + 1e-12)
    return t1, t2


def _check_open_interval(x: float, lo: float, hi: float, name: str):
    if not (lo < x < hi):
        raise DomainError(f"{name}={x} outside ({lo}, {hi})")


def profile_L(t: float) -> float:
    """Stationarity profile of the angular parametrisation, defined on (0, pi/2)."""
    _check_open_interval(t, 0.0, math.pi / 2, "t")
    c, s = math.cos(t), math.sin(t)
    return (2 * c * c - 1.5 * math.log(3.0) * math.cos(2 * t)
            - 3 * c * c * s * math.log((1 + s) / (1 - s)))


def profile_L_prime(t: float) -> float:
    _check_open_interval(t, 0.0, math.pi / 2, "t")
    c, s = math.cos(t), math.sin(t)
    return ((3 * math.log(3.0) - 5) * math.sin(2 * t)
            - math.log((1 + s) / (1 - s)) * (9 * c ** 3 - 6 * c))


def profile_f(xi: float) -> float:
    """Energy of the isosceles inscribed triangle with half-base parameter xi in (0, sqrt 2)."""
    _check_open_interval(xi, 0.0, math.sqrt(2.0), "xi")
    return (1 - xi * xi / 4 * math.log(xi * xi / (4 - xi * xi))
            + math.log((2 + xi) / (2 - xi)) / (2 * xi)) / 3


def argmax_profile_f(tol: float = 1e-10) -> float:
    return float(optimize.golden(lambda x: -profile_f(x), brack=(0.2, 0.9, 1.4), tol=tol))


def energy_from_sides(l1: float, l2: float, l3: float, tol: float = 1e-6) -> float:
    """Energy of a triangle inscribed in the unit circle from its side lengths.

    The triple must be the chords of an acute or right triangle inscribed in
    the unit circle, i.e. sum(arccos(l_i / 2)) = pi/2 up to ``tol``.
    """
    ls = (float(l1), float(l2), float(l3))
    if any(not (0.0 < l <= 2.0 + tol) for l in ls):
        raise NotInscribable(f"sides {ls} are not chords of the unit circle")
    ls = tuple(min(l, 2.0) for l in ls)
    if abs(sum(math.acos(l / 2.0) for l in ls) - math.pi / 2) > tol:
        raise NotInscribable(f"sides {ls} do not form an acute or right triangle in the unit circle")
    num = 0.0
    den = 0.0
    for l in ls:
        s = math.sqrt(max(0.0, 4.0 - l * l))
        den += l * s
        if s >= 1e-13:
            num += l ** 3 * math.log((2 + s) / (2 - s))
    return 1.0 / 3.0 + num / (12.0 * den)


def isosceles_third_side(l: float) -> float:
    """Base of the inscribed isosceles triangle with legs ``l`` in [sqrt 2, 2)."""
    return l * math.sqrt(4.0 - l * l)


def write_energy_csv(reports: Iterable[EnergyReport], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["l1", "l2", "l3", "area", "circumradius", "energy", "method"])
    for r in reports:
        row = r.row()
        w.writerow([f"{row[k]:.12g}" for k in ("l1", "l2", "l3", "area", "circumradius", "energy")]
                   + [row["method"]])


def random_triangle(rng: np.random.Generator) -> Triangle:
    while True:
        try:
            return Triangle(tuple(map(tuple, rng.random((3, 2)))))
        except DegenerateTriangle:
            continue
