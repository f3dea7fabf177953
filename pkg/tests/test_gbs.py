import json
import warnings
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from gbsopt.gbs import (
    RK4_ISB,
    ButcherTableau,
    check_step_count,
    classical_rk4,
    forward_euler,
    gbs_evaluate,
    gbs_stability_polynomial,
    tableau_stability_polynomial,
)
from gbsopt.numkernel import RationalPolynomial, exp_coefficients

even = st.integers(min_value=1, max_value=20).map(lambda k: 2 * k)


def _sympy_gbs(n):
    """Oracle: run the FE / leap-frog / average recursion symbolically."""
    z = sp.symbols("z")
    h = z / n
    ys = [sp.Integer(1), 1 + h]
    for _ in range(n):
        ys.append(sp.expand(ys[-2] + 2 * h * ys[-1]))
    out = sp.Poly(sp.expand((ys[n - 1] + 2 * ys[n] + ys[n + 1]) / 4), z)
    return [Fraction(int(c.p), int(c.q)) for c in reversed(out.all_coeffs())]


def test_n2_polynomial():
    assert gbs_stability_polynomial(2) == RationalPolynomial([1, 1, Fraction(1, 2), Fraction(1, 8)])


@pytest.mark.parametrize("n", [2, 4, 6, 10, 16])
def test_matches_symbolic_recursion(n):
    assert gbs_stability_polynomial(n).coefficients == tuple(_sympy_gbs(n))


@given(even)
def test_degree_and_second_order_consistency(n):
    p = gbs_stability_polynomial(n)
    assert p.degree == n + 1
    e = exp_coefficients(3)
    assert p.coefficients[:3] == tuple(e[:3])


def test_n2_deviates_at_third_power():
    p = gbs_stability_polynomial(2)
    assert p.coefficient(3) != Fraction(1, 6)


@pytest.mark.parametrize("bad", [0, 1, 3, -2, 2.5, True])
def test_rejects_invalid_counts(bad):
    with pytest.raises(ValueError):
        check_step_count(bad)
    with pytest.raises(ValueError):
        gbs_evaluate(bad, 0.1)


def test_evaluate_examples():
    assert gbs_evaluate(2, 0) == 1
    assert gbs_evaluate(2, 1.0) == pytest.approx(2.625, abs=1e-15)
    exact = complex(sum(complex(float(c)) * (10j) ** k for k, c in enumerate(gbs_stability_polynomial(20).coefficients)))
    assert abs(gbs_evaluate(20, 10j) - exact) <= 1e-10 * abs(exact)


@given(even, st.floats(min_value=-40, max_value=40))
def test_recursion_agrees_with_exact_on_axis(n, y):
    p = gbs_stability_polynomial(n)
    # exact evaluation at i*y using rational y
    yq = Fraction(y).limit_denominator(10**8)
    re = sum((c * yq**k * (1 if k % 4 == 0 else -1) for k, c in enumerate(p.coefficients) if k % 2 == 0), Fraction(0))
    im = sum((c * yq**k * (1 if k % 4 == 1 else -1) for k, c in enumerate(p.coefficients) if k % 2 == 1), Fraction(0))
    exact = complex(float(re), float(im))
    got = gbs_evaluate(n, 1j * float(yq))
    assert abs(got - exact) <= 1e-9 * max(abs(exact), 1.0)


def test_evaluate_vectorized_shape():
    z = np.array([[0.1j, 1.0], [2.0j, -1.0]])
    out = gbs_evaluate(4, z)
    assert out.shape == z.shape
    assert out[0, 1] == pytest.approx(gbs_evaluate(4, 1.0))


def test_overflow_is_reported_as_nonfinite():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        out = gbs_evaluate(2, 1e200j)
    assert not np.isfinite(out)


def test_tableau_polynomials():
    assert tableau_stability_polynomial(forward_euler()) == RationalPolynomial([1, 1])
    assert tableau_stability_polynomial(classical_rk4()) == RationalPolynomial(exp_coefficients(4))


@given(st.integers(min_value=1, max_value=6), st.data())
def test_explicit_tableau_degree_bounded_by_stages(s, data):
    entry = st.fractions(min_value=-2, max_value=2, max_denominator=9)
    A = [[data.draw(entry) if j < i else Fraction(0) for j in range(s)] for i in range(s)]
    b = [data.draw(entry) for _ in range(s)]
    t = ButcherTableau.from_lists(A, b)
    assert tableau_stability_polynomial(t).degree <= s


def test_implicit_tableau_rejected():
    t = ButcherTableau.from_lists([[Fraction(1, 2)]], [1])
    with pytest.raises(ValueError):
        tableau_stability_polynomial(t)


def test_inconsistent_abscissae_warn():
    with pytest.warns(UserWarning):
        ButcherTableau.from_lists([[0, 0], [1, 0]], [Fraction(1, 2), Fraction(1, 2)], [0, Fraction(1, 2)])


def test_tableau_json_round_trip(tmp_path):
    rk4 = classical_rk4()
    path = tmp_path / "rk4.json"
    rk4.save(path)
    assert ButcherTableau.load(path) == rk4
    data = json.loads(path.read_text())
    data["extra"] = 1
    with pytest.raises(ValueError):
        ButcherTableau.from_json(data)


def test_rk4_isb_constant():
    assert RK4_ISB == pytest.approx(2.8284271247461903)
