import csv
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gbsopt.extrapolation import CATALOG_NAMES, catalog_scheme, make_scheme, partition_plan
from gbsopt.gbs import classical_rk4, forward_euler, tableau_stability_polynomial
from gbsopt.numkernel import RationalPolynomial, exp_coefficients
from gbsopt.stability import (
    boundary_scan,
    components_evaluator,
    isb,
    leading_error,
    leading_error_exact,
    normalized_isb,
    polynomial_evaluator,
    scheme_evaluator,
    scheme_isb,
    write_boundary_csv,
)

RK4 = tableau_stability_polynomial(classical_rk4())
FE = tableau_stability_polynomial(forward_euler())


def _reference_isb(evaluator, y_max, n=400_001, tol=1e-10):
    """Oracle: brute-force first-violation scan on a fine uniform grid."""
    y = np.linspace(0, y_max, n)
    bad = np.nonzero(np.abs(evaluator(1j * y)) > 1 + tol)[0]
    return y[bad[0]] if bad.size else y_max


def test_second_order_taylor_has_zero_isb():
    assert isb(polynomial_evaluator(RationalPolynomial([1, 1, Fraction(1, 2)]))) == 0


def test_forward_euler_zero_isb():
    assert isb(polynomial_evaluator(FE)) == 0


def test_rk4_isb():
    assert isb(polynomial_evaluator(RK4)) == pytest.approx(2.8284, abs=1e-3)
    assert isb(polynomial_evaluator(RK4)) == pytest.approx(np.sqrt(8), abs=1e-9)


def test_gbs_8_6_isb():
    assert scheme_isb(catalog_scheme("GBS_8_6")) == pytest.approx(0.7675 * 23, abs=0.02)


@pytest.mark.parametrize("name", ["FD8", "GBS_8_6", "GBS_12_8"])
def test_isb_agrees_with_brute_force(name):
    ev = scheme_evaluator(catalog_scheme(name))
    value = isb(ev)
    assert value == pytest.approx(_reference_isb(ev, value * 1.01), abs=1e-4 * value)


def test_combined_evaluator_matches_exact_polynomial():
    s = catalog_scheme("FD8")
    y = np.linspace(0, 10, 50)
    a = scheme_evaluator(s)(1j * y)
    b = polynomial_evaluator(s.polynomial)(1j * y)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)
    c = components_evaluator(s.step_counts, s.float_weights)(1j * y)
    assert np.allclose(a, c, rtol=0, atol=1e-13)


def test_normalized_reports():
    r = normalized_isb(catalog_scheme("GBS_8_8"), partition_plan(catalog_scheme("GBS_8_8").step_counts, 8))
    assert r.isb_normalized == pytest.approx(0.8176, abs=1e-3)
    assert r.critical_path_evals == 31
    assert r.rk4_ratio == pytest.approx(8.96, abs=0.02)
    r = normalized_isb(catalog_scheme("GBS_12_8"), partition_plan(catalog_scheme("GBS_12_8").step_counts, 8))
    assert r.isb_normalized == pytest.approx(0.7116, abs=1e-3)
    assert r.isb_normalized == r.isb / r.critical_path_evals


def test_normalized_rejects_foreign_plan():
    with pytest.raises(ValueError):
        normalized_isb(catalog_scheme("FD8"), partition_plan([2, 4], 1))


@pytest.mark.parametrize("name", CATALOG_NAMES)
def test_catalog_invariants(name):
    s = catalog_scheme(name)
    r = normalized_isb(s)
    assert r.isb > 0
    assert r.a_p2 < 0
    assert r.isb_normalized < 1


@pytest.mark.parametrize("name", ["FD8", "GBS_8_6"])
def test_isb_monotone_under_tolerance(name):
    ev = scheme_evaluator(catalog_scheme(name))
    a = isb(ev, tol=1e-10)
    b = isb(ev, tol=1e-11)
    delta = a / 1e4
    assert b <= a + 1e-12
    assert a - b < 10 * delta


def test_boundary_forward_euler_circle():
    pts = np.array(boundary_scan(polynomial_evaluator(FE), 128))
    assert np.max(np.abs(np.abs(pts + 1) - 1)) < 1e-6


def test_boundary_rk4():
    ev = polynomial_evaluator(RK4)
    pts = np.array(boundary_scan(ev, 256))
    assert np.all(np.abs(np.abs(ev(pts)) - 1) < 1e-8)
    real = pts[np.abs(pts.imag) < 1e-12].real
    assert real.min() == pytest.approx(-2.785293563, abs=1e-3)
    assert np.max(np.abs(pts.imag)) >= 2.8284 - 1e-3
    near_axis = pts[np.abs(pts.real) < 0.05]
    assert np.min(np.abs(np.abs(near_axis.imag) - 2.8284)) < 0.05
    # mirrored across the real axis
    assert np.allclose(np.sort_complex(pts), np.sort_complex(pts.conj()), atol=1e-12)


def test_boundary_resolution_floor():
    with pytest.raises(ValueError):
        boundary_scan(polynomial_evaluator(RK4), 32)


def test_boundary_csv(tmp_path):
    path = tmp_path / "b.csv"
    write_boundary_csv([1 + 2j, -0.5 - 1e-17j], path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["re", "im"]
    assert complex(float(rows[2][0]), float(rows[2][1])) == -0.5 - 1e-17j


def test_truncated_exponential_error_coefficients():
    a5, a6 = leading_error_exact(RationalPolynomial(exp_coefficients(4)), 4)
    assert a5 == Fraction(1, 120)
    assert a6 == Fraction(-1, 144)


def test_leading_error_order_mismatch():
    with pytest.raises(ValueError):
        leading_error(RationalPolynomial(exp_coefficients(4)), 8)


def test_gbs_8_6_departure_sign():
    assert leading_error(catalog_scheme("GBS_8_6"))[1] < 0


@pytest.mark.parametrize("name", CATALOG_NAMES)
def test_leading_error_against_R_minus_exp(name):
    # Oracle: R = exp + e*zeta**(p+1) + ... inverts to xi = i*theta - e*(i*theta)**(p+1) + ...,
    # and (i)**(p+1) = i for p divisible by 4, so a_{p+1} = -e.
    s = catalog_scheme(name)
    p = s.order
    defect = s.polynomial.coefficient(p + 1) - exp_coefficients(p + 2)[p + 1]
    assert leading_error_exact(s)[0] == -defect


@given(st.floats(min_value=0.0, max_value=2.8))
def test_rk4_inside_its_isb(y):
    assert abs(polynomial_evaluator(RK4)(np.array([1j * y]))[0]) <= 1 + 1e-10
