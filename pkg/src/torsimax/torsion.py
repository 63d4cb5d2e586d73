"""p-torsion functions on cell-centred grids and the derived shape functionals.

The discrete energy of a grid function ``u`` vanishing off the mask is

    F(u) = h^N * sum_cells 2^-N * sum_{s in {+,-}^N} (1/p) (|D_s u|^2 + delta^2)^(p/2)
           - h^N * sum u,

where ``D_s u`` collects one-sided differences (forward or backward per axis)
at a cell. For p = 2 this is the five-point Dirichlet energy. The minimiser
is found by damped Newton with Armijo backtracking (default) or plain
gradient descent.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np
import pyamg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .distance import ScalarField
from .domains import GridMask, perforated_disc, rasterize, subgrid_holes, well_radius
from .errors import (
    EmptyDomain,
    EmptyList,
    InvalidP,
    NotConverged,
    OutsideBall,
    ResolutionTooCoarse,
    ZeroField,
)


def conjugate(p: float) -> float:
    return p / (p - 1.0)


def _check_p(p: float) -> float:
    p = float(p)
    if not p > 1.0 or not math.isfinite(p):
        raise InvalidP(f"p must exceed 1, got {p}")
    return p


@dataclass(frozen=True)
class SolverConfig:
    p: float = 2.0
    h: float = 1.0 / 128
    max_iterations: int = 200
    tolerance: float = 1e-9
    step_rule: str = "backtracking"  # or "fixed"
    method: str = "newton"  # or "gradient"
    delta: float = 1e-8  # gradient regularisation, relative to the domain size
    step: float = 1.0  # step for the fixed rule (scaled by h^2 in gradient mode)

    def __post_init__(self):
        _check_p(self.p)
        if not self.h > 0:
            raise ValueError("h must be positive")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.step_rule not in ("fixed", "backtracking"):
            raise ValueError("step_rule must be 'fixed' or 'backtracking'")
        if self.method not in ("newton", "gradient"):
            raise ValueError("method must be 'newton' or 'gradient'")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")


class PEnergy:
    """Discrete p-energy on a mask, with gradient and Hessian in the unknowns."""

    def __init__(self, mask: np.ndarray, h: float, p: float, delta: float = 0.0,
                 holes: np.ndarray | None = None, hole_radius: float = 0.0):
        self.mask = np.asarray(mask, dtype=bool)
        if not self.mask.any():
            raise EmptyDomain("mask has no cells")
        self.h = float(h)
        self.p = _check_p(p)
        self.delta = float(delta)
        self.ndim = self.mask.ndim
        self.vol = self.h ** self.ndim
        self.n = int(self.mask.sum())
        self._build()
        # unresolved holes: energy C |u_c|^p / p on each host cell
        if holes is not None and len(holes):
            number = -np.ones(self.mask.shape, dtype=np.int64)
            number[self.mask] = np.arange(self.n)
            self.well_idx = number[tuple(np.asarray(holes).T)]
            self.well_cap = hole_capacity(hole_radius, well_radius(self.h), self.p)
        else:
            self.well_idx = np.zeros(0, dtype=np.int64)
            self.well_cap = 0.0

    def _well_power(self, u) -> float:
        if not len(self.well_idx):
            return 0.0
        return self.well_cap * float(np.sum(np.abs(u[self.well_idx]) ** self.p))

    def _build(self):
        shape = np.array(self.mask.shape)
        big = shape + 4
        unk = -np.ones(tuple(big), dtype=np.int64)
        inner = tuple(slice(2, 2 + s) for s in shape)
        unk[inner][self.mask] = np.arange(self.n)
        # evaluated cells: original grid plus one layer around it
        ev = tuple(slice(1, 3 + s) for s in shape)
        idx = np.indices(tuple(big))
        ev_idx = [a[ev].ravel() for a in idx]
        m = ev_idx[0].size
        rows = np.arange(m)
        here = unk[tuple(ev_idx)]
        self.ops = []
        for k in range(self.ndim):
            pair = []
            for sgn in (+1, -1):
                nb = list(ev_idx)
                nb[k] = nb[k] + sgn
                there = unk[tuple(nb)]
                # forward: (u[c+e] - u[c]) / h; backward: (u[c] - u[c-e]) / h
                r, c, v = [], [], []
                far, near = (there, here) if sgn > 0 else (here, there)
                for col, val in ((far, 1.0), (near, -1.0)):
                    ok = col >= 0
                    r.append(rows[ok])
                    c.append(col[ok])
                    v.append(np.full(ok.sum(), val / self.h))
                M = sp.csr_matrix((np.concatenate(v), (np.concatenate(r), np.concatenate(c))),
                                  shape=(m, self.n))
                pair.append(M)
            self.ops.append(pair)
        self.m = m
        self.combos = list(itertools.product((0, 1), repeat=self.ndim))
        self.weight = self.vol / len(self.combos)

    def _grads(self, u):
        return [[self.ops[k][s] @ u for s in (0, 1)] for k in range(self.ndim)]

    def gradient_power(self, u) -> float:
        """h^N * mean over combos of sum |D_s u|^p, without regularisation."""
        G = self._grads(u)
        tot = 0.0
        for combo in self.combos:
            r2 = sum(G[k][s] ** 2 for k, s in enumerate(combo))
            tot += float(np.sum(r2 ** (self.p / 2)))
        return self.weight * tot + self._well_power(u)

    def value(self, u) -> float:
        G = self._grads(u)
        tot = 0.0
        d2 = self.delta ** 2
        for combo in self.combos:
            r2 = sum(G[k][s] ** 2 for k, s in enumerate(combo)) + d2
            tot += float(np.sum(r2 ** (self.p / 2)))
        return (self.weight * tot + self._well_power(u)) / self.p - self.vol * float(np.sum(u))

    def grad(self, u) -> np.ndarray:
        G = self._grads(u)
        d2 = self.delta ** 2
        g = np.zeros(self.n)
        for combo in self.combos:
            gs = [G[k][s] for k, s in enumerate(combo)]
            r2 = sum(x ** 2 for x in gs) + d2
            a = r2 ** (self.p / 2 - 1)
            for k, s in enumerate(combo):
                g += self.ops[k][s].T @ (a * gs[k])
        g *= self.weight
        if len(self.well_idx):
            uc = u[self.well_idx]
            np.add.at(g, self.well_idx, self.well_cap * np.abs(uc) ** (self.p - 2) * uc)
        return g - self.vol

    def hessian(self, u) -> sp.csr_matrix:
        G = self._grads(u)
        d2 = self.delta ** 2
        H = sp.csr_matrix((self.n, self.n))
        for combo in self.combos:
            gs = [G[k][s] for k, s in enumerate(combo)]
            Ds = [self.ops[k][s] for k, s in enumerate(combo)]
            r2 = sum(x ** 2 for x in gs) + d2
            a = r2 ** (self.p / 2 - 1)
            b = (self.p - 2) * r2 ** (self.p / 2 - 2) if self.p != 2 else None
            for k in range(self.ndim):
                for l in range(self.ndim):
                    w = a.copy() if k == l else np.zeros(self.m)
                    if b is not None:
                        w += b * gs[k] * gs[l]
                    if k == l or b is not None:
                        H = H + Ds[k].T @ sp.diags(w) @ Ds[l]
        H = self.weight * H
        if len(self.well_idx):
            diag = np.zeros(self.n)
            uc = np.abs(u[self.well_idx])
            np.add.at(diag, self.well_idx, self.well_cap * (self.p - 1) * uc ** (self.p - 2))
            H = H + sp.diags(diag)
        return H.tocsr()

    def laplacian(self) -> sp.csr_matrix:
        """Matrix of the p = 2 energy's quadratic form divided by the cell volume."""
        L = sp.csr_matrix((self.n, self.n))
        for k in range(self.ndim):
            for s in (0, 1):
                L = L + self.ops[k][s].T @ self.ops[k][s]
        return (L / 2).tocsr()


@dataclass(frozen=True)
class TorsionField:
    field: ScalarField
    p: float
    energy_value: float
    iterations: int
    residual: float
    history: tuple = ()
    identity_gap: float = 0.0  # |int |grad w|^p - int w| / int w before the final rescaling
    holes: np.ndarray | None = None  # host cells of sub-grid holes
    hole_radius: float = 0.0

    def to_json(self) -> dict:
        out = self.field.to_json()
        out.update({"p": self.p, "energy": self.energy_value, "iterations": self.iterations})
        return out


def hole_capacity(rho: float, r_e: float, p: float) -> float:
    """p-capacity of the planar annulus rho < |x| < r_e (0 inside, 1 outside)."""
    if not 0 < rho < r_e:
        raise ValueError("need 0 < rho < r_e")
    if p == 2:
        integral = math.log(r_e / rho)
    else:
        a = (p - 2) / (p - 1)
        integral = (r_e ** a - rho ** a) / a
    return 2 * math.pi * integral ** (1 - p)


def _scaling(energy: PEnergy, u: np.ndarray) -> float:
    """Factor t minimising F(t u) for the unregularised energy."""
    A = energy.gradient_power(u)
    S = energy.vol * float(np.sum(u))
    if A <= 0 or S <= 0:
        return 1.0
    return (S / A) ** (1.0 / (energy.p - 1.0))


DIRECT_SOLVE_LIMIT = 20_000


def spd_solve(A: sp.csr_matrix, b: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """Sparse SPD solve: direct for small systems, AMG-preconditioned CG otherwise."""
    if A.shape[0] <= DIRECT_SOLVE_LIMIT:
        return spla.spsolve(A.tocsc(), b)
    ml = pyamg.smoothed_aggregation_solver(A.tocsr(), symmetry="symmetric")
    return ml.solve(b, tol=rtol, accel="cg", maxiter=500)


def _ray_gap(E: PEnergy, g: np.ndarray, u: np.ndarray) -> float:
    # derivative of F(t u) at t = 1, relative to int u
    return abs(float(g @ u)) / (E.vol * float(np.sum(u)))


def _newton(E: PEnergy, u: np.ndarray, cfg: SolverConfig, history: list):
    f = E.value(u)
    history.append(f)
    dec = math.inf
    for it in range(1, cfg.max_iterations + 1):
        g = E.grad(u)
        H = E.hessian(u)
        # tiny diagonal shift keeps the degenerate p > 2 Hessian invertible
        shift = 1e-14 * H.diagonal().max()
        step = spd_solve(H + shift * sp.identity(E.n, format="csr"), -g)
        dec = float(-g @ step)
        if dec / 2 <= cfg.tolerance * abs(f) and _ray_gap(E, g, u) <= cfg.tolerance:
            return u, it, dec / 2 / abs(f)
        t = 1.0
        while True:
            trial = u + t * step
            ft = E.value(trial)
            if cfg.step_rule == "fixed" or ft <= f - 1e-4 * t * dec:
                break
            t *= 0.5
            if t < 1e-12:
                return u, it, dec / 2 / abs(f)
        u, f = trial, ft
        history.append(f)
    raise NotConverged(f"Newton did not converge in {cfg.max_iterations} iterations",
                       cfg.max_iterations, dec)


def _gradient_descent(E: PEnergy, u: np.ndarray, cfg: SolverConfig, history: list):
    f = E.value(u)
    history.append(f)
    quiet = 0
    alpha = cfg.step * E.h ** 2 / E.vol
    for it in range(1, cfg.max_iterations + 1):
        g = E.grad(u)
        gg = float(g @ g)
        if gg == 0.0:
            return u, it, 0.0
        t = alpha if cfg.step_rule == "fixed" else alpha * 4.0
        while True:
            trial = u - t * g
            ft = E.value(trial)
            if cfg.step_rule == "fixed" or ft <= f - 1e-4 * t * gg:
                break
            t *= 0.5
            if t < 1e-20:
                return u, it, 0.0
        if cfg.step_rule == "backtracking":
            alpha = t
        rel = (f - ft) / abs(ft)
        u, f = trial, ft
        history.append(f)
        quiet = quiet + 1 if rel < cfg.tolerance else 0
        if quiet >= 10:
            return u, it, rel
    raise NotConverged(f"gradient descent did not converge in {cfg.max_iterations} iterations",
                       cfg.max_iterations, None)


def solve_torsion(grid: GridMask | np.ndarray, config: SolverConfig,
                  origin: Sequence[float] | None = None) -> TorsionField:
    """Minimise the discrete p-energy over grid functions vanishing off the mask."""
    holes, rho = np.zeros((0, 2), dtype=int), 0.0
    if isinstance(grid, GridMask):
        mask, origin, h = grid.mask, grid.origin, grid.spacing
        holes, rho = subgrid_holes(grid)
    else:
        mask = np.asarray(grid, dtype=bool)
        h = config.h
        origin = tuple(origin) if origin is not None else (0.0,) * mask.ndim
    if not mask.any():
        raise EmptyDomain("mask has no cells")
    p = config.p
    scale = h * max(mask.shape)
    E2 = PEnergy(mask, h, 2.0, holes=holes, hole_radius=rho)
    # p = 2 solution: one linear solve of the five-point system
    u = spd_solve(E2.hessian(np.zeros(E2.n)), np.full(E2.n, E2.vol), rtol=1e-12)
    history: list = []
    if p == 2.0:
        E = E2
        it, res = 1, 0.0
        history.append(E.value(u))
    else:
        E = PEnergy(mask, h, p, config.delta * scale, holes=holes, hole_radius=rho)
        u = u * _scaling(E, u)
        if config.method == "newton" and p < 2:
            # the Hessian blows up where the gradient vanishes; relax delta gradually
            it = 0
            d = 1e-2
            while d > config.delta:
                Ed = PEnergy(mask, h, p, d * scale, holes=holes, hole_radius=rho)
                u, k, _ = _newton(Ed, u, config, [])
                it += k
                d /= 10
            u, k, res = _newton(E, u, config, history)
            it += k
        elif config.method == "newton":
            u, it, res = _newton(E, u, config, history)
        else:
            u, it, res = _gradient_descent(E, u, config, history)
    u = np.maximum(u, 0.0)
    S = E.vol * float(u.sum())
    gap = abs(E.gradient_power(u) - S) / S
    t = _scaling(E, u)
    if E.value(t * u) <= E.value(u):
        u = t * u
    values = np.zeros(mask.shape)
    values[mask] = u
    return TorsionField(ScalarField(tuple(origin), float(h), values, mask), p,
                        E.value(u), it, float(res), tuple(history), float(gap), holes, rho)


# ---------------------------------------------------------------------------
# Analytic oracles
# ---------------------------------------------------------------------------


def torsion_ball_analytic(r: float, N: int, p: float, x) -> float:
    """p-torsion function of the ball of radius r in R^N at x (point or radius)."""
    p = _check_p(p)
    rad = float(np.linalg.norm(np.atleast_1d(np.asarray(x, dtype=float))))
    if rad > r * (1 + 1e-12):
        raise OutsideBall(f"|x|={rad} exceeds r={r}")
    q = conjugate(p)
    return max(r ** q - rad ** q, 0.0) / (q * N ** (q / p))


def phi_p_ball(N: int, p: float) -> float:
    q = conjugate(_check_p(p))
    return q / (N + q)


def phi_p_1d(radii: Iterable[float], p: float) -> float:
    """Efficiency of the p-torsion function of a disjoint union of intervals."""
    r = np.asarray(list(radii), dtype=float)
    if r.size == 0:
        raise EmptyList("radii must be nonempty")
    if np.any(r <= 0):
        raise ValueError("radii must be positive")
    q = conjugate(_check_p(p))
    return q / (q + 1) * float(np.sum(r ** (q + 1)) / (r.max() ** q * r.sum()))


# ---------------------------------------------------------------------------
# Shape functionals
# ---------------------------------------------------------------------------


def _values(field: TorsionField) -> np.ndarray:
    w = field.field.values[field.field.mask]
    if not np.any(w > 0):
        raise ZeroField("torsion field vanishes identically")
    return w


def phi_p(field: TorsionField) -> float:
    w = _values(field)
    return float(w.mean() / w.max())


def psi_p(field: TorsionField) -> float:
    w = _values(field)
    return float(w.mean() / np.mean(w ** field.p) ** (1.0 / field.p))


def torsional_rigidity(field: TorsionField) -> float:
    _values(field)
    return field.field.integral() ** (field.p - 1.0)


def lambda_p_upper(field: TorsionField) -> float:
    """Rayleigh quotient of the torsion function: an upper bound on lambda_p."""
    w = _values(field)
    f = field.field
    E = PEnergy(f.mask, f.spacing, field.p, holes=field.holes, hole_radius=field.hole_radius)
    return E.gradient_power(w) / (E.vol * float(np.sum(w ** field.p)))


def F_p(field: TorsionField, area: float | None = None) -> float:
    area = field.field.mask.sum() * field.field.cell_volume if area is None else area
    return lambda_p_upper(field) * torsional_rigidity(field) / area ** (field.p - 1.0)


def lambda_2_grid(grid: GridMask) -> float:
    """Smallest Dirichlet eigenvalue of the five-point Laplacian on the mask."""
    L = PEnergy(grid.mask, grid.spacing, 2.0).laplacian()
    vals = spla.eigsh(L.tocsc(), k=1, sigma=0.0, which="LM", return_eigenvectors=False)
    return float(vals[0])


@dataclass(frozen=True)
class ShapeFunctionals:
    phi_p: float
    psi_p: float
    T_p: float
    lambda_p_upper: float
    F_p: float

    def as_row(self) -> list:
        return [self.phi_p, self.psi_p, self.T_p, self.lambda_p_upper, self.F_p]


def shape_functionals(field: TorsionField, area: float | None = None) -> ShapeFunctionals:
    return ShapeFunctionals(phi_p(field), psi_p(field), torsional_rigidity(field),
                            lambda_p_upper(field), F_p(field, area))


def jensen_gap(values: Sequence[float], p: float) -> tuple[float, float]:
    """Both sides of mean(v^p) >= mean(v)^p + mean|v - mean v|^p / (2^(p-1) - 1)."""
    p = float(p)
    if p < 2:
        raise InvalidP("the quantitative Jensen inequality needs p >= 2")
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise EmptyList("values must be nonempty")
    if np.any(v < 0):
        raise ValueError("values must be nonnegative")
    m = v.mean()
    lhs = float(np.mean(v ** p))
    rhs = float(m ** p + np.mean(np.abs(v - m) ** p) / (2 ** (p - 1) - 1))
    return lhs, rhs


# ---------------------------------------------------------------------------
# Perforated-disc sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    param: float
    functionals: ShapeFunctionals
    iterations: int = 0

    @property
    def phi(self) -> float:
        return self.functionals.phi_p


def perforated_sweep(spacings: Sequence[float], p: float, h: float, R: float = 1.0,
                     config: SolverConfig | None = None) -> list[SweepRow]:
    """Efficiency on the disc minus holes of radius s^3 on the lattice s Z^2.

    Holes below grid resolution enter through their annulus capacity (see
    :func:`hole_capacity`) rather than by deleting cells.
    """
    rows = []
    for s in sorted(set(float(v) for v in spacings), reverse=True):
        if s < 4 * h:
            raise ResolutionTooCoarse(f"spacing {s} is below 4h = {4 * h}")
        g = rasterize(perforated_disc(R, s), h)
        cfg = config or SolverConfig(p=p, h=h)
        tf = solve_torsion(g, SolverConfig(**{**cfg.__dict__, "p": p, "h": h}))
        rows.append(SweepRow(s, shape_functionals(tf), tf.iterations))
    return rows


def write_functionals_csv(rows: Iterable[SweepRow], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["param", "phi", "psi", "Tp", "lambda_upper", "Fp"])
    for r in rows:
        w.writerow([f"{r.param:.12g}"] + [f"{v:.12g}" for v in r.functionals.as_row()])
