from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gbsopt.extrapolation import ExtrapolationScheme, build_vandermonde, make_scheme, verify_order
from gbsopt.optimizer import (
    ContourSpec,
    FreeWeightBasis,
    convex_subproblem,
    imaginary_axis,
    imaginary_with_bulge,
    maximize_h,
    rationalize,
    rationalize_scheme,
    rationalize_weights,
    search_fully_determined,
)
from gbsopt.stability import components_evaluator, normalized_isb, scheme_isb

AXIS = imaginary_axis()


def _direct_r(counts, weights, z):
    """Oracle: max |R| - 1 by direct GBS evaluation of the combined scheme."""
    return float(np.max(np.abs(components_evaluator(counts, weights)(z))) - 1)


def test_contour_validation():
    with pytest.raises(ValueError):
        imaginary_axis(64)
    c = imaginary_with_bulge(0.05, 0.3)
    pts = c.points(2.0)
    assert np.isclose(pts, 2j).any()
    assert np.all(pts.imag >= 0)
    assert pts.real.max() == pytest.approx(0.05)
    assert c.to_json()["kind"] == "imaginary_with_real_bulge"


def test_contour_points_scale_with_h():
    assert np.allclose(AXIS.points(3.0), 3.0 * AXIS.points(1.0))
    assert len(AXIS.points(1.0, density=4)) > len(AXIS.points(1.0))


def test_basis_reproduces_scheme_polynomial():
    basis = FreeWeightBasis(range(2, 12, 2), 8)
    c = np.array([0.013])
    z = 1j * np.linspace(0, 9, 40)
    r0, q = basis.evaluate(z)
    scheme = basis.scheme(c)
    assert np.allclose(r0 + c @ q, components_evaluator(scheme.step_counts, scheme.float_weights)(z), atol=1e-12)


def test_fully_determined_subproblem():
    res = convex_subproblem(3.0, AXIS, [2, 4], 4)
    assert res.c_free.size == 0
    w = make_scheme(4, [2, 4]).float_weights
    assert res.r == pytest.approx(_direct_r([2, 4], w, AXIS.points(3.0)), abs=1e-15)


def test_small_h_feasible():
    res = convex_subproblem(0.5, AXIS, [2, 4, 6, 8], 4)
    # r <= 0 up to rounding of |R| = 1 - O(y**6) near the origin
    assert res.r <= 4 * np.finfo(float).eps
    s = FreeWeightBasis([2, 4, 6, 8], 4).scheme(res.c_free)
    # exact oracle: |R(iy)|**2 <= 1 at rational samples of [0, 0.5]
    poly = s.polynomial.coefficients
    for k in range(0, 101):
        y = Fraction(k, 200)
        re = sum((c * y**j * (-1) ** (j // 2) for j, c in enumerate(poly) if j % 2 == 0), Fraction(0))
        im = sum((c * y**j * (-1) ** (j // 2) for j, c in enumerate(poly) if j % 2 == 1), Fraction(0))
        assert re * re + im * im <= 1


def test_reported_r_is_true_minimax():
    basis = FreeWeightBasis(range(2, 16, 2), 8)
    res = convex_subproblem(12.0, AXIS, basis, refine=0)
    s = basis.scheme(res.c_free)
    assert res.r == pytest.approx(_direct_r(s.step_counts, s.float_weights, AXIS.points(12.0)), abs=1e-10)


@given(st.lists(st.floats(-0.2, 0.2), min_size=3, max_size=3),
       st.lists(st.floats(-0.2, 0.2), min_size=3, max_size=3))
def test_objective_convex_in_free_weights(a, b):
    basis = FreeWeightBasis(range(2, 16, 2), 8)
    z = AXIS.points(10.0)
    r0, q = basis.evaluate(z)

    def obj(c):
        return np.max(np.abs(r0 + np.asarray(c) @ q)) - 1

    mid = 0.5 * (np.asarray(a) + np.asarray(b))
    assert obj(mid) <= max(obj(a), obj(b)) + 1e-12


def test_lp_path_runs():
    res = convex_subproblem(5.0, AXIS, [2, 4, 6, 8], 4, method="lp", refine=0)
    assert res.r < 1e-6


@pytest.fixture(scope="module")
def opt8_22():
    return maximize_h(AXIS, range(2, 23, 2), 8)


def test_optimized_band_six_cores(opt8_22):
    assert opt8_22.isb_normalized == pytest.approx(0.7695, rel=0.02)
    assert opt8_22.critical_path == 23
    assert opt8_22.r <= 1e-8
    assert verify_order(opt8_22.scheme) == 8


def test_optimized_isb_matches_scan(opt8_22):
    # the contour is enforced to 1e-8; the tau=1e-10 scan may stop a bit before h
    measured = scheme_isb(opt8_22.scheme)
    assert measured == pytest.approx(opt8_22.h, rel=1e-3)
    assert opt8_22.isb == pytest.approx(measured, rel=1e-12)


def test_optimized_beats_fully_determined(opt8_22):
    square = normalized_isb(make_scheme(8, range(2, 23, 2)))
    assert opt8_22.isb_normalized >= square.isb_normalized
    assert opt8_22.isb_normalized < 1


@pytest.mark.slow
def test_optimized_band_eight_cores():
    opt = maximize_h(AXIS, range(2, 31, 2), 8)
    assert opt.isb_normalized == pytest.approx(0.8196, rel=0.02)
    assert opt.isb_normalized < 1


def test_order4_beats_square():
    opt = maximize_h(AXIS, range(2, 9, 2), 4)
    assert opt.isb_normalized > normalized_isb(make_scheme(4, [2, 4])).isb_normalized
    assert opt.isb_normalized < 1


def test_more_free_weights_never_worse():
    vals = [maximize_h(AXIS, range(2, n + 1, 2), 4).isb_normalized * (n + 1) for n in (6, 8, 10)]
    # ISB (unnormalized) is monotone in the feasible set; allow solver tolerance
    assert vals[0] <= vals[1] * (1 + 1e-4) and vals[1] <= vals[2] * (1 + 1e-4)


def test_trajectory_logged(opt8_22):
    hs = [h for h, _ in opt8_22.trajectory]
    assert len(hs) > 5
    assert opt8_22.to_json()["h"] == opt8_22.h


@pytest.mark.parametrize("x,tol,expected", [
    (1 / 3, 1e-6, Fraction(1, 3)),
    (0.5, 1e-2, Fraction(1, 2)),
    (-0.75, 1e-9, Fraction(-3, 4)),
    (0.0, 1e-3, Fraction(0)),
])
def test_rationalize_examples(x, tol, expected):
    assert rationalize(x, tol) == expected


def test_rationalize_exact_input_unchanged():
    q = Fraction(2165, 767488)
    assert rationalize(q, 1e-3) is q
    assert rationalize_weights([q, Fraction(-86504, 5761)], 1e-2) == [q, Fraction(-86504, 5761)]


@pytest.mark.parametrize("tol", [0.0, -1e-3, 0.02])
def test_rationalize_tolerance_range(tol):
    with pytest.raises(ValueError):
        rationalize(0.1, tol)


@given(st.floats(-1e4, 1e4).filter(lambda v: abs(v) > 1e-6), st.sampled_from([1e-2, 1e-5, 1e-9, 1e-13]))
def test_rationalize_within_tolerance(x, tol):
    q = rationalize(x, tol)
    assert abs(float(q) - x) <= tol * abs(x)


def test_rationalized_scheme_small_loss(opt8_22):
    scheme, before, after = rationalize_scheme(opt8_22)
    assert verify_order(scheme) == 8
    V = build_vandermonde(scheme.step_counts, 8)
    assert all(r == 0 for r in V.residual(scheme.weights))
    assert after >= before * (1 - 0.005)
    assert all(isinstance(c, Fraction) for c in scheme.c_free)


def test_rationalize_rational_scheme_is_identity():
    s = make_scheme(8, range(2, 12, 2), c_free=["1/50"])
    out, before, after = rationalize_scheme(s, rel_tol=1e-3)
    assert out.c_free == s.c_free
    assert before == after


def test_search_small_order4():
    res = search_fully_determined(4, max_count=10)
    # oracle: evaluate every pair directly
    best = max(((a, b) for a in range(2, 11, 2) for b in range(a + 2, 11, 2)),
               key=lambda c: scheme_isb(make_scheme(4, c)) / (max(c) + 1))
    assert res.best.step_counts == best


def test_search_combination_cap():
    with pytest.raises(ValueError):
        search_fully_determined(16, max_count=24, max_combinations=10)
