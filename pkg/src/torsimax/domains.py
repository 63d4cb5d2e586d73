"""Domain descriptors, exact distance to the complement, rasterization and
eps-lattice approximation.

Every kind exposes ``DomainDescriptor.signed_distance`` (positive inside,
negative outside); rasterization and the distance fields build on it.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyResult, InvalidDomain, InvalidParameters
from .geometry import LatticeDomain, corner_touching_vertices, hex_centers, hex_tiling

KINDS = ("disc", "rectangle", "interval_union_1d", "disc_union",
         "honeycomb_perforated", "perforated_disc", "lattice")


@dataclass(frozen=True)
class DomainDescriptor:
    """Analytic description of a domain: a ``kind`` and its parameters."""

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameters(f"unknown domain kind {self.kind!r}")

    @property
    def dim(self) -> int:
        return 1 if self.kind == "interval_union_1d" else 2

    def to_json(self) -> dict:
        params = dict(self.params)
        params.pop("_points", None)
        params.pop("_lattice", None)
        return {"kind": self.kind, "params": params}

    @classmethod
    def from_json(cls, obj) -> "DomainDescriptor":
        if isinstance(obj, (str, Path)):
            obj = json.loads(Path(obj).read_text())
        if not isinstance(obj, dict) or "kind" not in obj:
            raise InvalidDomain("domain JSON needs a 'kind' field")
        kind, params = obj["kind"], obj.get("params", {})
        builders = {
            "disc": lambda p: disc(**p),
            "rectangle": lambda p: rectangle(**p),
            "interval_union_1d": lambda p: interval_union(**p),
            "disc_union": lambda p: disc_union(**p),
            "honeycomb_perforated": lambda p: honeycomb_perforated(**p),
            "perforated_disc": lambda p: perforated_disc(**p),
            "lattice": lambda p: lattice(LatticeDomain.from_json(p)),
        }
        if kind not in builders:
            raise InvalidDomain(f"unknown domain kind {kind!r}")
        try:
            return builders[kind](params)
        except TypeError as exc:
            raise InvalidDomain(f"bad parameters for {kind}: {exc}") from exc

    # --- geometry -------------------------------------------------------

    def bbox(self) -> tuple:
        p = self.params
        k = self.kind
        if k in ("disc", "honeycomb_perforated", "perforated_disc"):
            R = p["R"]
            return (-R, -R, R, R)
        if k == "rectangle":
            return (0.0, 0.0, p["a"], p["b"])
        if k == "interval_union_1d":
            c, r = _interval_layout(p)
            return (float(c[0] - r[0]), float(c[-1] + r[-1]))
        if k == "disc_union":
            c, r = _disc_union_layout(p)
            return (float(c[0, 0] - r[0]), -float(r.max()), float(c[-1, 0] + r[-1]), float(r.max()))
        if k == "lattice":
            q = self.lattice_domain
            i0, j0, i1, j1 = q.bbox_indices()
            return (i0 * q.eps, j0 * q.eps, i1 * q.eps, j1 * q.eps)
        raise AssertionError(k)

    @property
    def area(self) -> float:
        p = self.params
        k = self.kind
        if k in ("disc", "honeycomb_perforated"):
            return math.pi * p["R"] ** 2
        if k == "perforated_disc":
            pts = self.removed_points
            return math.pi * (p["R"] ** 2 - len(pts) * p["hole_radius"] ** 2)
        if k == "rectangle":
            return p["a"] * p["b"]
        if k == "interval_union_1d":
            return 2.0 * sum(p["radii"])
        if k == "disc_union":
            _, r = _disc_union_layout(p)
            return float(math.pi * np.sum(r ** 2))
        if k == "lattice":
            return self.lattice_domain.area
        raise AssertionError(k)

    @property
    def inradius(self) -> float | None:
        """Closed-form maximum of the distance function, when available."""
        p = self.params
        if self.kind == "disc":
            return p["R"]
        if self.kind == "rectangle":
            return min(p["a"], p["b"]) / 2.0
        if self.kind == "interval_union_1d":
            return max(p["radii"])
        if self.kind == "disc_union":
            return 1.0
        return None

    @property
    def removed_points(self) -> np.ndarray:
        """Centres of the perforations (empty for unperforated kinds)."""
        return self.params.get("_points", np.zeros((0, 2)))

    @property
    def lattice_domain(self) -> LatticeDomain:
        return self.params["_lattice"]

    def signed_distance(self, x: np.ndarray) -> np.ndarray:
        """Exact signed distance to the boundary: positive inside, negative outside.

        For perforated kinds the removed points count as boundary, so the value
        is ``min(d_outer, d_points)`` inside and the outer value outside.
        """
        x = np.asarray(x, dtype=float)
        p = self.params
        k = self.kind
        if k == "interval_union_1d":
            x = x.reshape(-1)
            c, r = _interval_layout(p)
            return np.max(r[None, :] - np.abs(x[:, None] - c[None, :]), axis=1)
        x = x.reshape(-1, 2)
        if k == "disc":
            return p["R"] - np.hypot(x[:, 0], x[:, 1])
        if k == "rectangle":
            a, b = p["a"], p["b"]
            inside = np.minimum(np.minimum(x[:, 0], a - x[:, 0]), np.minimum(x[:, 1], b - x[:, 1]))
            dx = np.maximum(np.maximum(-x[:, 0], x[:, 0] - a), 0.0)
            dy = np.maximum(np.maximum(-x[:, 1], x[:, 1] - b), 0.0)
            return np.where(inside >= 0, inside, -np.hypot(dx, dy))
        if k == "disc_union":
            c, r = _disc_union_layout(p)
            out = np.full(len(x), -np.inf)
            for ck, rk in zip(c, r):
                np.maximum(out, rk - np.hypot(x[:, 0] - ck[0], x[:, 1] - ck[1]), out=out)
            return out
        if k in ("honeycomb_perforated", "perforated_disc"):
            outer = p["R"] - np.hypot(x[:, 0], x[:, 1])
            pts = self.removed_points
            if len(pts) == 0:
                return outer
            dp, _ = cKDTree(pts).query(x)
            if k == "perforated_disc":
                dp = dp - p["hole_radius"]
            return np.where(outer > 0, np.minimum(outer, dp), outer)
        if k == "lattice":
            q = self.lattice_domain
            d = segment_distance(x, q.boundary_segments())
            inside = q.contains_many(x, closed=False)
            return np.where(inside, d, -d)
        raise AssertionError(k)


def _positive(name: str, v) -> float:
    try:
        v = float(v)
    except (TypeError, ValueError) as exc:
        raise InvalidParameters(f"{name} must be a number") from exc
    if not (v > 0 and math.isfinite(v)):
        raise InvalidParameters(f"{name} must be positive, got {v}")
    return v


def disc(R: float = 1.0) -> DomainDescriptor:
    return DomainDescriptor("disc", {"R": _positive("R", R)})


def rectangle(a: float, b: float = 1.0) -> DomainDescriptor:
    """The rectangle ``[0, a] x [0, b]``."""
    return DomainDescriptor("rectangle", {"a": _positive("a", a), "b": _positive("b", b)})


def interval_union(radii, gap: float = 1.0) -> DomainDescriptor:
    """Disjoint intervals of half-lengths ``radii`` separated by ``gap``."""
    radii = [_positive("radius", r) for r in radii]
    if not radii:
        raise InvalidParameters("interval_union needs at least one radius")
    return DomainDescriptor("interval_union_1d", {"radii": radii, "gap": _positive("gap", gap)})


def _interval_layout(p) -> tuple[np.ndarray, np.ndarray]:
    r = np.asarray(p["radii"], dtype=float)
    left = np.concatenate([[0.0], np.cumsum(2 * r[:-1] + p["gap"])])
    return left + r, r


def disc_union(n: int, N: int = 2, spacing: float = 2.0) -> DomainDescriptor:
    """Discs of radius ``k**(-1/N)``, k = 1..n, centred at ``(spacing*k, 0)``."""
    n = int(n)
    if n < 1:
        raise InvalidParameters("n must be at least 1")
    if n > 1 and spacing <= 1.0 + 2.0 ** (-1.0 / N):
        raise InvalidParameters("spacing too small: neighbouring discs would overlap")
    return DomainDescriptor("disc_union", {"n": n, "N": int(N), "spacing": float(spacing)})


def _disc_union_layout(p) -> tuple[np.ndarray, np.ndarray]:
    k = np.arange(1, p["n"] + 1, dtype=float)
    r = k ** (-1.0 / p["N"])
    c = np.stack([p["spacing"] * k, np.zeros_like(k)], axis=1)
    return c, r


def honeycomb_perforated(R: float, eps: float, variant: str = "centers") -> DomainDescriptor:
    """Disc of radius R minus the centres (or vertices) of a hexagon tiling of side eps."""
    R = _positive("R", R)
    eps = _positive("eps", eps)
    if variant not in ("centers", "vertices"):
        raise InvalidParameters("variant must be 'centers' or 'vertices'")
    box = (-R - eps, -R - eps, R + eps, R + eps)
    if variant == "centers":
        pts = hex_centers(eps, box)
    else:
        pts = hex_tiling(eps, box).vertices
    pts = pts[np.hypot(pts[:, 0], pts[:, 1]) < R]
    return DomainDescriptor("honeycomb_perforated",
                            {"R": R, "eps": eps, "variant": variant, "_points": pts})


def perforated_disc(R: float, spacing: float, hole_radius: float | None = None) -> DomainDescriptor:
    """Disc minus closed holes on the square lattice ``spacing * Z^2``.

    ``hole_radius`` defaults to ``spacing**3``. Holes meeting the outer
    circle are dropped.
    """
    R = _positive("R", R)
    s = _positive("spacing", spacing)
    rho = s ** 3 if hole_radius is None else _positive("hole_radius", hole_radius)
    if rho >= s / 2:
        raise InvalidParameters("holes would overlap")
    m = int(math.floor(R / s))
    g = s * np.arange(-m, m + 1)
    X, Y = np.meshgrid(g, g, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    pts = pts[np.hypot(pts[:, 0], pts[:, 1]) + rho < R]
    return DomainDescriptor("perforated_disc",
                            {"R": R, "spacing": s, "hole_radius": rho, "_points": pts})


def lattice(q: LatticeDomain) -> DomainDescriptor:
    return DomainDescriptor("lattice", {"eps": q.eps, "cells": sorted(map(list, q.cells)),
                                        "_lattice": q})


def lattice_from_json(path) -> DomainDescriptor:
    return lattice(LatticeDomain.from_json(path))


def segment_distance(x: np.ndarray, segs: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Distance from each point of ``x`` (n, 2) to the union of segments (m, 2, 2)."""
    x = np.asarray(x, dtype=float).reshape(-1, 2)
    a = segs[:, 0, :]
    d = segs[:, 1, :] - a
    dd = np.einsum("ij,ij->i", d, d)
    out = np.empty(len(x))
    for s in range(0, len(x), chunk):
        P = x[s:s + chunk, None, :] - a[None, :, :]
        t = np.clip(np.einsum("nmj,mj->nm", P, d) / dd, 0.0, 1.0)
        R = P - t[..., None] * d[None, :, :]
        out[s:s + chunk] = np.sqrt(np.min(np.einsum("nmj,nmj->nm", R, R), axis=1))
    return out


# ---------------------------------------------------------------------------
# Rasterization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridMask:
    """Cell-centred grid: cell ``idx`` has centre ``origin + spacing * idx``."""

    origin: tuple
    spacing: float
    mask: np.ndarray
    domain: Any = None

    @property
    def shape(self) -> tuple:
        return self.mask.shape

    @property
    def ndim(self) -> int:
        return self.mask.ndim

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.ndim

    @property
    def area(self) -> float:
        return float(self.mask.sum()) * self.cell_volume

    def centers(self) -> np.ndarray:
        """Coordinates of all cell centres, shape ``mask.shape + (ndim,)``."""
        axes = [self.origin[k] + self.spacing * np.arange(n) for k, n in enumerate(self.shape)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def masked_centers(self) -> np.ndarray:
        return self.centers()[self.mask]


def grid_for_bbox(bbox, h: float, pad: int = 0):
    """Cell-centred grid covering ``bbox`` symmetrically, plus ``pad`` cells per side."""
    h = _positive("h", h)
    dim = len(bbox) // 2
    lo, hi = np.asarray(bbox[:dim], float), np.asarray(bbox[dim:], float)
    n = np.maximum(1, np.ceil((hi - lo) / h - 1e-9).astype(int)) + 2 * pad
    mid = 0.5 * (lo + hi)
    origin = mid - 0.5 * (n - 1) * h
    return tuple(float(v) for v in origin), tuple(int(v) for v in n)


def rasterize(d: DomainDescriptor, h: float) -> GridMask:
    """Mask of grid cells whose centres lie in the open domain.

    Holes of radius below :func:`well_radius` keep their host cell; the
    torsion solver represents them through :func:`subgrid_holes`. Larger
    holes always remove at least their host cell.
    """
    origin, shape = grid_for_bbox(d.bbox(), h, pad=1)
    g = GridMask(origin, float(h), np.zeros(shape, dtype=bool), d)
    X = g.centers().reshape(-1, d.dim)
    mask = (d.signed_distance(X) > 0).reshape(shape)
    if d.kind == "perforated_disc" and d.params["hole_radius"] >= well_radius(h):
        # holes too large for the sub-grid model but missing every centre
        idx, ok = _host_cells(d, origin, shape, h)
        mask[tuple(idx[ok].T)] = False
    if not mask.any():
        raise EmptyResult("no grid cell lies inside the domain")
    return GridMask(origin, float(h), mask, d)


def well_radius(h: float) -> float:
    """Equivalent radius of a five-point cell: a cell held at zero acts as a hole this size."""
    return math.exp(-math.pi / 2) * h


def _host_cells(d: DomainDescriptor, origin, shape, h):
    idx = np.rint((d.removed_points - np.asarray(origin)) / h).astype(int)
    ok = np.all((idx >= 0) & (idx < np.asarray(shape)), axis=1)
    return idx, ok


def subgrid_holes(g: GridMask) -> tuple[np.ndarray, float]:
    """Host-cell indices of holes smaller than :func:`well_radius`, and their radius."""
    d = g.domain
    if d is None or d.kind != "perforated_disc" or d.params["hole_radius"] >= well_radius(g.spacing):
        return np.zeros((0, g.ndim), dtype=int), 0.0
    idx, ok = _host_cells(d, g.origin, g.shape, g.spacing)
    idx = idx[ok]
    idx = idx[g.mask[tuple(idx.T)]]
    return idx, d.params["hole_radius"]


# ---------------------------------------------------------------------------
# eps-lattice inner approximation
# ---------------------------------------------------------------------------


def _closed_square_inside(d: DomainDescriptor, lo: np.ndarray, eps: float) -> np.ndarray:
    """Exact test that closed squares ``lo + [0, eps]^2`` lie in the open domain."""
    corners = [lo, lo + [eps, 0.0], lo + [0.0, eps], lo + [eps, eps]]
    p = d.params
    k = d.kind

    def max_corner_dist(center):
        return np.max([np.hypot(c[:, 0] - center[0], c[:, 1] - center[1]) for c in corners], axis=0)

    if k in ("disc", "honeycomb_perforated", "perforated_disc"):
        ok = max_corner_dist((0.0, 0.0)) < p["R"]
        pts = d.removed_points
        if len(pts):
            # distance from each removed point to the closed square
            tree = cKDTree(pts)
            centre = lo + eps / 2
            reach = eps / math.sqrt(2) + p.get("hole_radius", 0.0)
            for n, nbrs in enumerate(tree.query_ball_point(centre, reach + 1e-12)):
                for m in nbrs:
                    dx = max(lo[n, 0] - pts[m, 0], 0.0, pts[m, 0] - lo[n, 0] - eps)
                    dy = max(lo[n, 1] - pts[m, 1], 0.0, pts[m, 1] - lo[n, 1] - eps)
                    if math.hypot(dx, dy) <= p.get("hole_radius", 0.0):
                        ok[n] = False
        return ok
    if k == "rectangle":
        return ((lo[:, 0] > 0) & (lo[:, 0] + eps < p["a"])
                & (lo[:, 1] > 0) & (lo[:, 1] + eps < p["b"]))
    if k == "disc_union":
        c, r = _disc_union_layout(p)
        ok = np.zeros(len(lo), dtype=bool)
        for ck, rk in zip(c, r):
            ok |= max_corner_dist(ck) < rk
        return ok
    if k == "lattice":
        q = d.lattice_domain
        # the open polyomino contains a closed eps-square only if it is a
        # union of interior cells of a finer lattice; use the exact locator
        ok = np.ones(len(lo), dtype=bool)
        for n, (x, y) in enumerate(lo):
            for cx, cy in ((x, y), (x + eps, y), (x, y + eps), (x + eps, y + eps), (x + eps / 2, y + eps / 2)):
                if q.locate(Fraction(cx) / Fraction(q.eps), Fraction(cy) / Fraction(q.eps)) != "interior":
                    ok[n] = False
                    break
        return ok
    raise InvalidParameters(f"approximate_lattice does not support kind {k!r}")


def approximate_lattice(d: DomainDescriptor, eps: float) -> LatticeDomain:
    """Union of the closed eps-cells compactly contained in the open domain."""
    eps = _positive("eps", eps)
    if d.dim != 2:
        raise InvalidParameters("approximate_lattice needs a planar domain")
    x0, y0, x1, y1 = d.bbox()
    i = np.arange(math.floor(x0 / eps), math.ceil(x1 / eps) + 1)
    j = np.arange(math.floor(y0 / eps), math.ceil(y1 / eps) + 1)
    I, J = np.meshgrid(i, j, indexing="ij")
    I, J = I.ravel(), J.ravel()
    # cell (i, j) covers eps*[i-1, i] x eps*[j-1, j]
    lo = np.stack([(I - 1) * eps, (J - 1) * eps], axis=1)
    ok = _closed_square_inside(d, lo, eps)
    cells = list(zip(I[ok].tolist(), J[ok].tolist()))
    if not cells:
        raise EmptyResult(f"no eps-cell fits inside the domain at eps={eps}")
    if corner_touching_vertices(cells):
        raise InvalidDomain("the eps-approximation has cells touching only at a corner")
    return LatticeDomain.from_cells(eps, cells)


def random_polyomino(rng: np.random.Generator, n_cells: int, eps: float = 1.0) -> LatticeDomain:
    """Random polyomino grown cell by cell, never creating corner-only contacts."""
    if n_cells < 1:
        raise InvalidParameters("n_cells must be at least 1")
    cells = {(1, 1)}
    frontier = sorted({(1, 2), (2, 1), (0, 1), (1, 0)})
    while len(cells) < n_cells:
        c = frontier[int(rng.integers(len(frontier)))]
        trial = cells | {c}
        if not _has_corner_touch_near(trial, c):
            cells = trial
        fr = set(frontier)
        fr.discard(c)
        if c in cells:
            i, j = c
            fr.update(n for n in ((i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)) if n not in cells)
        frontier = sorted(fr)
        if not frontier:
            break
    return LatticeDomain.from_cells(eps, cells)


def _has_corner_touch_near(cells: set, c) -> bool:
    i, j = c
    for a in (i - 1, i):
        for b in (j - 1, j):
            sw, se = (a, b) in cells, (a + 1, b) in cells
            nw, ne = (a, b + 1) in cells, (a + 1, b + 1) in cells
            if (sw and ne and not se and not nw) or (se and nw and not sw and not ne):
                return True
    return False
