from __future__ import annotations

import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import jn_zeros

from torsimax import domains as dom
from torsimax import torsion as tor
from torsimax.errors import EmptyList, InvalidP, NotConverged, OutsideBall, ResolutionTooCoarse

J01_SQ = float(jn_zeros(0, 1)[0]) ** 2


def solve(d, p, h, **kw):
    return tor.solve_torsion(dom.rasterize(d, h), tor.SolverConfig(p=p, h=h, **kw))


def centre_value(tf):
    f = tf.field
    idx = np.unravel_index(np.argmax(np.where(f.mask, f.values, -np.inf)), f.values.shape)
    return f.values[idx]


def test_ball_formula():
    assert tor.torsion_ball_analytic(1.0, 2, 2.0, [0.0, 0.0]) == pytest.approx(0.25)
    # q = 3/2 for p = 3: w(0) = 1 / (q N^(q/p))
    assert tor.torsion_ball_analytic(1.0, 2, 3.0, 0.0) == pytest.approx(1 / (1.5 * math.sqrt(2)))
    assert tor.torsion_ball_analytic(1.0, 2, 2.0, [1.0, 0.0]) == 0.0
    assert tor.phi_p_ball(2, 2.0) == pytest.approx(0.5)
    with pytest.raises(OutsideBall):
        tor.torsion_ball_analytic(1.0, 2, 2.0, [1.5, 0.0])


@settings(max_examples=40, deadline=None)
@given(st.floats(1.2, 8.0), st.integers(1, 3), st.floats(0.1, 3.0))
def test_ball_formula_solves_radial_equation(p, N, r):
    # -(rho^(N-1) |w'|^(p-2) w')' = rho^(N-1): flux through the sphere equals the volume term
    rho = 0.6 * r
    e = 1e-6 * r
    dw = (tor.torsion_ball_analytic(r, N, p, rho + e) - tor.torsion_ball_analytic(r, N, p, rho - e)) / (2 * e)
    assert abs(dw) ** (p - 1) == pytest.approx(rho / N, rel=1e-6)


@pytest.mark.parametrize("p", [2.0, 3.0, 6.0, 1.5])
def test_disc_centre_value_and_efficiency(p):
    tf = solve(dom.disc(1.0), p, 1 / 64)
    exact = tor.torsion_ball_analytic(1.0, 2, p, 0.0)
    assert centre_value(tf) == pytest.approx(exact, rel=0.03)
    assert tor.phi_p(tf) == pytest.approx(tor.phi_p_ball(2, p), rel=0.03)


def test_energy_identity_and_minimality():
    tf = solve(dom.disc(1.0), 4.0, 1 / 48)
    assert tf.identity_gap < 1e-6
    # the minimum energy equals -(1 - 1/p) * integral of w
    S = tf.field.integral()
    assert tf.energy_value == pytest.approx(-(1 - 1 / 4.0) * S, rel=1e-6)


def test_newton_history_is_monotone():
    tf = solve(dom.rectangle(1.0, 0.6), 5.0, 1 / 40)
    h = np.array(tf.history)
    assert len(h) > 1 and np.all(np.diff(h) <= 1e-14 * np.abs(h[:-1]))


def test_grid_refinement_reduces_error():
    exact = tor.torsion_ball_analytic(1.0, 2, 2.0, 0.0)
    errs = [abs(centre_value(solve(dom.disc(1.0), 2.0, h)) - exact) for h in (1 / 32, 1 / 64, 1 / 128)]
    assert errs[2] < errs[1] < errs[0]
    assert errs[2] < 0.01 * exact


def test_one_dimensional_union_matches_formula():
    radii = [1.0, 0.5, 0.25]
    for p in (2.0, 3.0, 1.5):
        tf = solve(dom.interval_union(radii), p, 1 / 512)
        assert tor.phi_p(tf) == pytest.approx(tor.phi_p_1d(radii, p), rel=5e-3)


def test_phi_p_1d_single_interval():
    for p in (1.5, 2.0, 4.0):
        q = tor.conjugate(p)
        assert tor.phi_p_1d([2.0], p) == pytest.approx(q / (q + 1))
    with pytest.raises(EmptyList):
        tor.phi_p_1d([], 2.0)


def _random_energy(p, delta, seed=0):
    g = dom.rasterize(dom.disc(1.0), 1 / 10)
    rng = np.random.default_rng(seed)
    E = tor.PEnergy(g.mask, g.spacing, p, delta)
    return E, rng.random(E.n)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 7.0])
def test_gradient_matches_finite_differences(p):
    E, u = _random_energy(p, 1e-3)
    g = E.grad(u)
    rng = np.random.default_rng(1)
    for _ in range(5):
        v = rng.standard_normal(E.n)
        e = 1e-6
        fd = (E.value(u + e * v) - E.value(u - e * v)) / (2 * e)
        assert fd == pytest.approx(g @ v, rel=1e-6, abs=1e-12)


@pytest.mark.parametrize("p", [1.5, 3.0, 6.0])
def test_hessian_matches_finite_differences(p):
    E, u = _random_energy(p, 1e-3, seed=2)
    H = E.hessian(u)
    v = np.random.default_rng(3).standard_normal(E.n)
    e = 1e-6
    fd = (E.grad(u + e * v) - E.grad(u - e * v)) / (2 * e)
    assert np.allclose(H @ v, fd, rtol=1e-5, atol=1e-9 * np.abs(fd).max())


def test_gradient_descent_agrees_with_newton():
    d = dom.rectangle(1.0, 1.0)
    a = solve(d, 3.0, 1 / 12, method="newton")
    b = solve(d, 3.0, 1 / 12, method="gradient", max_iterations=20_000, tolerance=1e-10)
    assert np.allclose(a.field.values, b.field.values, rtol=1e-4, atol=1e-6 * a.field.max())


def test_not_converged():
    with pytest.raises(NotConverged):
        solve(dom.disc(1.0), 6.0, 1 / 32, max_iterations=1)


def test_invalid_p():
    with pytest.raises(InvalidP):
        tor.SolverConfig(p=1.0)
    with pytest.raises(InvalidP):
        tor.jensen_gap([1.0, 2.0], 1.5)


def test_lambda_2_on_disc():
    g = dom.rasterize(dom.disc(1.0), 1 / 64)
    lam = tor.lambda_2_grid(g)
    assert lam == pytest.approx(J01_SQ, rel=0.03)
    tf = tor.solve_torsion(g, tor.SolverConfig(p=2.0, h=1 / 64))
    # Rayleigh quotient on the same discrete operator bounds the eigenvalue
    assert tor.lambda_p_upper(tf) >= lam * (1 - 1e-12)


def test_shape_functionals_on_disc():
    d = dom.disc(1.0)
    tf = solve(d, 2.0, 1 / 128)
    f = tor.shape_functionals(tf, d.area)
    # w = (1 - r^2)/4: integral pi/8, Rayleigh quotient exactly 6; O(h) boundary error
    assert f.T_p == pytest.approx(math.pi / 8, rel=0.015)
    assert f.lambda_p_upper == pytest.approx(6.0, rel=0.01)
    assert f.F_p == pytest.approx(0.75, rel=0.015)
    assert f.lambda_p_upper >= J01_SQ
    assert 0 < f.phi_p < f.psi_p <= 1
    assert f.F_p <= 1


def test_F_p_is_scale_invariant():
    a = tor.F_p(solve(dom.disc(1.0), 3.0, 1 / 32))
    b = tor.F_p(solve(dom.disc(2.0), 3.0, 2 / 32))
    assert a == pytest.approx(b, rel=1e-6)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 10.0), min_size=1, max_size=50), st.floats(2.0, 8.0))
def test_jensen_gap_inequality(values, p):
    lhs, rhs = tor.jensen_gap(values, p)
    assert lhs >= rhs * (1 - 1e-9) - 1e-12


def test_hole_capacity():
    assert tor.hole_capacity(0.01, 0.1, 2.0) == pytest.approx(2 * math.pi / math.log(10))
    assert tor.hole_capacity(0.01, 0.1, 2.0 + 1e-7) == pytest.approx(
        tor.hole_capacity(0.01, 0.1, 2.0), rel=1e-5)


def test_subgrid_holes_reduce_torsion():
    h = 1 / 64
    plain = tor.solve_torsion(dom.rasterize(dom.disc(1.0), h), tor.SolverConfig(p=2.0, h=h))
    holes = tor.solve_torsion(dom.rasterize(dom.perforated_disc(1.0, 0.125), h),
                              tor.SolverConfig(p=2.0, h=h))
    assert len(holes.holes) > 0
    assert holes.field.integral() < plain.field.integral()
    assert np.all(holes.field.values <= plain.field.values + 1e-12)


def test_perforated_sweep_resolution_and_csv():
    with pytest.raises(ResolutionTooCoarse):
        tor.perforated_sweep([0.05], 2.0, 1 / 32)
    rows = tor.perforated_sweep([0.25, 0.125], 2.0, 1 / 32)
    buf = io.StringIO()
    tor.write_functionals_csv(rows, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "param,phi,psi,Tp,lambda_upper,Fp"
    assert len(lines) == 3
