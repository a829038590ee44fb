import math
from dataclasses import replace

import pytest

from coupled_poisson.certify import (BoundSet, LocalizationBox, check_nonnegativity, check_solution_in_box,
                                     verify_conditions)
from coupled_poisson.disk import Grid, GridFunction
from coupled_poisson.exprlang import parse
from coupled_poisson.hammerstein import ProblemSpec, SolutionPair

from .conftest import F_EX

# c / 4 for the constant bounds 6 sqrt(e)/5, 1/5, 45/8, 35/24
EXPECTED_INTEGRALS = {
    "a": 6 * math.sqrt(math.e) / 5 / 4,
    "b": 1 / 20,
    "c": 45 / 32,
    "d": 35 / 96,
}


def test_box_validation():
    with pytest.raises(ValueError, match="r1 < R1"):
        LocalizationBox(0.5, 0.5, 0.1, 1.0)
    with pytest.raises(ValueError, match="r2 < R2"):
        LocalizationBox(0.1, 0.5, 1.0, 1.0)
    with pytest.raises(ValueError):
        LocalizationBox(-0.1, 0.5, 0.1, 1.0)


def test_bounds_must_depend_on_position_only():
    with pytest.raises(Exception):
        BoundSet.from_strings("u", "0", "1", "0")


def test_example_certificate(example_spec, example_box, example_bounds):
    cert = verify_conditions(example_spec, example_box, example_bounds)
    assert cert.passed
    radii = {"a": 0.5, "b": 1 / 21, "c": 1.5, "d": 1 / 6}
    for name, cond in cert.conditions.items():
        assert cond.passed, name
        assert cond.integral_value == pytest.approx(EXPECTED_INTEGRALS[name], abs=1e-6)
        assert cond.radius == pytest.approx(radii[name])
    # rounded reference values
    for name, ref in zip("abcd", (0.494623, 0.05, 1.40625, 0.364583)):
        assert abs(cert.conditions[name].integral_value - ref) < 1e-3


def test_d_clauses_reported_separately(example_spec, example_box, example_bounds):
    d = verify_conditions(example_spec, example_box, example_bounds).conditions["d"]
    assert set(d.clauses) == {"nonneg", "lower"}
    # g = g_lower exactly where x1 = 0, u = 0, v = r2: a tie, not a violation
    assert d.clauses["lower"].margin == pytest.approx(0.0, abs=1e-12)
    assert d.clauses["lower"].passed
    assert d.clauses["nonneg"].margin > 1.0
    assert d.to_dict()["clauses"]["lower"]["status"] == "pass"


def test_lowering_R1_fails_condition_a(example_spec, example_bounds):
    box = LocalizationBox(1 / 21, 0.49, 1 / 6, 1.5)
    cert = verify_conditions(example_spec, box, example_bounds)
    a = cert.conditions["a"]
    assert not a.passed and not cert.passed
    assert a.integral_margin == pytest.approx(0.49 - EXPECTED_INTEGRALS["a"], abs=1e-6)
    assert a.integral_margin == pytest.approx(-0.0046, abs=5e-5)
    assert all(cert.conditions[k].passed for k in "bcd")


def test_zero_upper_bound(example_spec, example_box, example_bounds):
    bounds = replace(example_bounds, f_upper=parse("0", ()))
    a = verify_conditions(example_spec, example_box, bounds).conditions["a"]
    assert a.integral_value == 0.0 and a.integral_margin > 0
    assert not a.pointwise_ok and not a.passed
    zero = ProblemSpec.from_strings("0", "0.75*(1+x1^2)*(1-v^2)*(2+sin(u))")
    a0 = verify_conditions(zero, example_box, bounds).conditions["a"]
    assert a0.pointwise_ok


def test_negative_bound_fails():
    spec = ProblemSpec.from_strings("1", "1", 16, 32)
    box = LocalizationBox(0.1, 0.5, 0.1, 0.5)
    bounds = BoundSet.from_strings("1", "x1", "1", "1")
    cert = verify_conditions(spec, box, bounds, ns=9)
    assert not cert.conditions["b"].bound_nonnegative
    assert not cert.conditions["b"].passed
    assert cert.notes


def test_ns_lower_limit(example_spec, example_box, example_bounds):
    with pytest.raises(ValueError):
        verify_conditions(example_spec, example_box, example_bounds, ns=8)


def test_monotone_in_radii(example_spec, example_box, example_bounds):
    base = verify_conditions(example_spec, example_box, example_bounds, ns=9).conditions
    big = replace(example_box, R1=0.6, R2=1.8)
    bigger = verify_conditions(example_spec, big, example_bounds, ns=9).conditions
    assert bigger["a"].integral_margin >= base["a"].integral_margin
    assert bigger["c"].integral_margin >= base["c"].integral_margin
    small = replace(example_box, r1=0.03, r2=0.1)
    smaller = verify_conditions(example_spec, small, example_bounds, ns=9).conditions
    assert smaller["b"].integral_margin >= base["b"].integral_margin
    assert smaller["d"].integral_margin >= base["d"].integral_margin


def test_constant_bound_matches_closed_form(example_spec, example_box, example_bounds):
    cert = verify_conditions(example_spec, example_box, example_bounds)
    for name in "abcd":
        assert cert.conditions[name].integral_value == pytest.approx(EXPECTED_INTEGRALS[name], abs=1e-6)


def test_doubling_samples_is_stable(example_spec, example_box, example_bounds):
    c1 = verify_conditions(example_spec, example_box, example_bounds, ns=17)
    c2 = verify_conditions(example_spec, example_box, example_bounds, ns=33)
    for name in "abc":
        assert c1.conditions[name].pointwise_margin > 1e-3
        assert c1.conditions[name].passed == c2.conditions[name].passed


def test_certificate_json_schema(example_spec, example_box, example_bounds):
    d = verify_conditions(example_spec, example_box, example_bounds).to_dict()
    assert d["Ns"] == 33 and d["grid"] == {"Nr": 64, "Ntheta": 128}
    for name in "abcd":
        entry = d["conditions"][name]
        for key in ("status", "pointwise_margin", "witness", "integral_value", "radius", "integral_margin"):
            assert key in entry


def _pair(grid, u, v):
    return SolutionPair(GridFunction(grid, u), GridFunction(grid, v), 0.0, 1, True)


def test_solution_in_box(example_solution, example_box):
    _, sol, _ = example_solution
    rep = check_solution_in_box(sol, example_box)
    assert rep.passed
    assert min(rep.margins.values()) > 0.09


def test_zero_solution_not_in_box(example_box):
    g = Grid(8, 16)
    rep = check_solution_in_box(_pair(g, 0.0, 0.0), example_box)
    assert not rep.passed and rep.margins["u_above_r1"] < 0


def test_box_is_strict(example_box):
    g = Grid(8, 16)
    rep = check_solution_in_box(_pair(g, 0.2, example_box.r2), example_box)
    assert rep.margins["v_above_r2"] == 0.0
    assert not rep.passed


def test_nonnegativity_reports():
    g = Grid(16, 32)
    rep = check_nonnegativity(parse(F_EX), g, 0.5, 1.5)
    assert not rep.violated and rep.minimum > 0.2
    rep = check_nonnegativity(parse("v"), g, 0.5, 1.5)
    assert rep.violated and rep.witness.v == -1.5
    rep = check_nonnegativity(parse("0"), g, 0.5, 1.5)
    assert rep.minimum == 0.0 and not rep.violated
