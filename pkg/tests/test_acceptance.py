"""Acceptance criteria, one test per criterion.

Every criterion is evaluated once by ``torsimax.verify.run`` at full
resolution; each test prints its pass/fail line and re-checks the raw
measurements against the tolerances pinned below.
"""
from __future__ import annotations

import math
import warnings

import pytest

from torsimax import verify

HONEYCOMB = 1.0 / 3.0 + math.log(3.0) / 4.0
# often-quoted decimal for the constant; it sits 4.2e-5 below the closed form
LITERAL_DECIMAL = 0.6079441542
LITERAL_BOUND = 0.6079441543

TOL = {
    1: {"quadrature": 1e-6, "closed_form": 1e-12, "runtime": 1.0},
    2: {"bound_slack": 1e-9, "near_equilateral": 0.6079 - 1e-3, "runtime": 30.0},
    3: {"relative": 1e-6},
    4: {"bound": LITERAL_BOUND, "grid_in_h": 3.0},
    6: {"gap": 0.02, "runtime": 300.0},
    7: {"phi2": 0.02, "phi_inf_in_h": 2.0, "thin_rectangle": 0.02, "h": 1 / 256},
    8: {"sup": 0.03, "identity_factor": 10.0, "h": 1 / 256},
    9: {"formula": 1e-15, "grid": 0.01},
    10: {"argmax": 1e-6, "sign_changes": 1},
    11: {"equality": 1e-12},
    12: {"phi6_soft": 0.95},
    14: {"relative": 1e-5},
}


@pytest.fixture(scope="module")
def results(pytestconfig):
    capture = pytestconfig.pluginmanager.getplugin("capturemanager")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        out = {r.number: r for r in verify.run(fast=False, seed=0)}
    with capture.global_and_fixture_disabled():
        print()
        print(verify.CONSTANT_NOTE)
        for k in sorted(out):
            print(out[k].line())
    return out


def test_constant_is_closed_form():
    assert HONEYCOMB == pytest.approx(0.6079864055, abs=1e-10)
    # the quoted decimal does not match 1/3 + ln(3)/4
    assert abs(LITERAL_DECIMAL - HONEYCOMB) > 4e-5


def test_01_honeycomb_constant(results):
    v, t = results[1].values, TOL[1]
    assert v["quadrature_error"] <= t["quadrature"]
    assert v["closed_form_error"] <= t["closed_form"]
    assert v["runtime"] < t["runtime"]
    assert results[1].passed


def test_02_equilateral_maximality(results):
    v, t = results[2].values, TOL[2]
    # checked against the closed-form constant; the literal bound is below it
    assert v["random_max"] <= HONEYCOMB + t["bound_slack"]
    assert t["near_equilateral"] <= v["near_equilateral_max"] <= HONEYCOMB + t["bound_slack"]
    assert v["runtime"] < t["runtime"]
    assert results[2].passed


def test_03_closed_form_vs_quadrature(results):
    assert results[3].values["max_relative_difference"] < TOL[3]["relative"]
    assert results[3].passed


def test_04_discrete_efficiency_bound(results):
    v, t = results[4].values, TOL[4]
    assert v["max_ratio"] <= t["bound"]
    assert v["exact_grid_error_in_h"] <= t["grid_in_h"]
    assert v["triangle_grid_error_in_h"] <= t["grid_in_h"]
    assert results[4].passed


def test_05_delaunay_properties(results):
    v = results[5].values
    assert v["unit_edge"] == v["crossing"] == v["circumcenter"] == 0
    assert results[5].passed


def test_06_honeycomb_convergence(results):
    v, t = results[6].values, TOL[6]
    r = v["ratios"]
    assert r[0] < r[1] < r[2]
    assert abs(r[2] - HONEYCOMB) <= t["gap"]
    assert abs(r[2] - LITERAL_DECIMAL) <= t["gap"]
    assert v["runtime"] < t["runtime"]
    assert results[6].passed


def test_07_ball_efficiency(results):
    v, t = results[7].values, TOL[7]
    assert v["h_pde"] == t["h"]
    assert v["phi2_rel_error"] <= t["phi2"]
    assert v["phi_inf_disc_error"] <= t["phi_inf_in_h"] * v["h_distance"]
    assert v["thin_rectangle_rel_error"] <= t["thin_rectangle"]
    assert results[7].passed


def test_08_torsion_oracle(results):
    v, t = results[8].values, TOL[8]
    assert v["h_pde"] == t["h"]
    assert max(v["sup_rel_errors"]) <= t["sup"]
    assert v["identity_gap"] <= t["identity_factor"] * v["solver_tolerance"]
    assert results[8].passed


def test_09_one_dimensional_formula(results):
    v, t = results[9].values, TOL[9]
    assert v["formula_error"] <= t["formula"]
    assert v["grid_rel_error"] <= t["grid"]
    assert results[9].passed


def test_10_profile_functions(results):
    v, t = results[10].values, TOL[10]
    assert abs(v["argmax"] - 1.0) <= t["argmax"]
    assert v["sign_changes"] == t["sign_changes"]
    assert v["first_sign"] < 0 < v["last_sign"]
    assert results[10].passed


def test_11_jensen(results):
    v = results[11].values
    assert v["violations"] == 0
    assert v["equality_error"] <= TOL[11]["equality"]
    assert results[11].passed


def test_12_super_dimensional(results):
    v = results[12].values
    assert v["psi_below_phi"] == 0 and v["fields"] > 0
    assert v["F6_disc"] < 1
    if max(v["phi6_sweep"]) > TOL[12]["phi6_soft"]:
        warnings.warn(f"Phi_6 over the perforated sweep reached {max(v['phi6_sweep']):.4f}")
    assert results[12].passed


def test_13_homogenization_trend(results):
    phis = results[13].values["phi2_sweep"]
    assert len(phis) == 3 and phis[0] < phis[1] < phis[2]
    assert results[13].passed


def test_14_energy_gradient(results):
    assert results[14].values["max_relative_error"] < TOL[14]["relative"]
    assert results[14].passed


def test_all_criteria_reported(results):
    assert sorted(results) == list(range(1, 15))
