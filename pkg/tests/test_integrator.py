import threading
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gbsopt.extrapolation import catalog_scheme, default_plan, partition_plan
from gbsopt.gbs import gbs_evaluate
from gbsopt.integrator import (
    InstabilityError,
    IntegrationProblem,
    gbs_component_step,
    integrate,
    macro_step,
)
from gbsopt.stability import components_evaluator, scheme_isb

GBS86 = catalog_scheme("GBS_8_6")
PLAN6 = partition_plan(GBS86.step_counts, 6)
PLAN1 = partition_plan(GBS86.step_counts, 1)


def _linear(lam):
    return lambda t, y: lam * y


def test_zero_rhs_component():
    y0 = np.array([1.5, -2.0])
    out = gbs_component_step(lambda t, y: np.zeros_like(y), 0.0, y0, 0.3, 6)
    assert np.array_equal(out, y0)


@given(st.integers(1, 10).map(lambda k: 2 * k), st.floats(0.01, 5.0))
def test_constant_rhs_exact(n, H):
    out = gbs_component_step(lambda t, y: 1.0, 0.0, 0.25, H, n)
    assert out == pytest.approx(0.25 + H, rel=1e-14, abs=1e-14)


@given(st.integers(1, 10).map(lambda k: 2 * k),
       st.complex_numbers(max_magnitude=3.0, allow_nan=False, allow_infinity=False))
def test_linear_component_matches_recursion(n, z):
    out = gbs_component_step(_linear(z), 0.0, 1.0 + 0j, 1.0, n)
    ref = gbs_evaluate(n, z)
    assert abs(out - ref) <= 1e-13 * max(abs(ref), 1.0)


def test_component_evaluation_count():
    calls = []
    gbs_component_step(lambda t, y: calls.append(t) or y, 0.0, 1.0, 1.0, 8)
    assert len(calls) == 9


def test_component_rejects_bad_inputs():
    with pytest.raises(ValueError):
        gbs_component_step(_linear(1.0), 0.0, 1.0, 1.0, 3)
    with pytest.raises(ValueError):
        gbs_component_step(_linear(1.0), 0.0, 1.0, 0.0, 4)


@pytest.mark.filterwarnings("ignore:overflow")
def test_component_instability():
    with pytest.raises(InstabilityError):
        gbs_component_step(lambda t, y: y * 1e300, 0.0, np.array([1e10]), 1.0, 6)


def test_macro_step_zero_rhs():
    y = np.array([0.3, 4.0])
    out = macro_step(GBS86, PLAN6, lambda t, y: np.zeros_like(y), 0.0, y, 0.7)
    assert np.array_equal(out.y_end, y)


def test_macro_step_linear_matches_polynomial():
    z = 9.0j
    out = macro_step(GBS86, PLAN6, _linear(z / 1.0), 0.0, np.array([1.0 + 0j]), 1.0)
    ref = components_evaluator(GBS86.step_counts, GBS86.float_weights)(np.array([z]))[0]
    assert abs(out.y_end[0] - ref) <= 1e-12 * abs(ref)


def test_parallel_equals_serial():
    rng = np.random.default_rng(7)
    A = rng.standard_normal((5, 5))
    y0 = rng.standard_normal(5)
    rhs = lambda t, y: A @ y + np.sin(t)
    a = macro_step(GBS86, PLAN6, rhs, 0.1, y0, 0.4)
    b = macro_step(GBS86, PLAN1, rhs, 0.1, y0, 0.4)
    assert np.array_equal(a.y_end, b.y_end)
    for n in GBS86.step_counts:
        assert np.array_equal(a.components[n], b.components[n])


def test_evaluation_counts_follow_plan():
    lock = threading.Lock()
    total = [0]

    def rhs(t, y):
        with lock:
            total[0] += 1
        return -y

    out = macro_step(GBS86, PLAN6, rhs, 0.0, np.ones(3), 0.5)
    assert out.evaluations == PLAN6.evaluations == (23,) * 6
    assert total[0] == sum(PLAN6.evaluations)


def test_plan_mismatch():
    with pytest.raises(ValueError):
        macro_step(GBS86, partition_plan([2, 4], 1), _linear(1.0), 0.0, 1.0, 1.0)


def test_exact_rational_mode():
    fd8 = catalog_scheme("FD8")
    y0 = np.array([Fraction(1)], dtype=object)
    out = macro_step(fd8, default_plan(fd8), lambda t, y: y * Fraction(1, 3), 0, y0, Fraction(1), exact=True)
    assert out.y_end[0] == fd8.polynomial(Fraction(1, 3))


def test_integrate_zero_rhs():
    prob = IntegrationProblem(lambda t, y: np.zeros_like(y), 0.0, np.array([2.0]), 3.0)
    res = integrate(GBS86, None, prob, 4)
    assert np.array_equal(res.y, prob.y0)
    assert res.steps == 4


def test_integrate_reports_evaluations():
    prob = IntegrationProblem(_linear(-1.0), 0.0, np.array([1.0]), 1.0)
    res = integrate(GBS86, PLAN6, prob, 3, max_workers=2)
    assert res.critical_path_evaluations == 3 * 23
    assert res.total_evaluations == 3 * 6 * 23
    assert res.to_json()["steps"] == 3


def test_two_half_steps_vs_one():
    lam = 4.0j
    prob = IntegrationProblem(_linear(lam), 0.0, np.array([1.0 + 0j]), 1.0)
    ev = components_evaluator(GBS86.step_counts, GBS86.float_weights)
    one = integrate(GBS86, PLAN6, prob, 1).y[0]
    two = integrate(GBS86, PLAN6, prob, 2).y[0]
    assert abs(one - ev(np.array([lam]))[0]) <= 1e-12
    assert abs(two - ev(np.array([lam / 2]))[0] ** 2) <= 1e-12


def test_bounded_inside_isb():
    omega = 1.0
    H = 0.95 * scheme_isb(GBS86) / omega
    prob = IntegrationProblem(_linear(1j * omega), 0.0, np.array([1.0 + 0j]), 1000 * H)
    res = integrate(GBS86, PLAN6, prob, 1000)
    assert abs(res.y[0]) <= (1 + 1e-10) ** 1000 + 1e-9


def test_linear_system_equivalence():
    rng = np.random.default_rng(3)
    eig = 1j * rng.uniform(-1, 1, 4) * 15 - rng.uniform(0, 1, 4)
    Q, _ = np.linalg.qr(rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))
    A = Q @ np.diag(eig) @ Q.conj().T
    y0 = rng.standard_normal(4) + 0j
    prob = IntegrationProblem(lambda t, y: A @ y, 0.0, y0, 10.0)
    res = integrate(GBS86, PLAN6, prob, 10)
    ev = components_evaluator(GBS86.step_counts, GBS86.float_weights)
    ref = Q @ (ev(eig) ** 10 * (Q.conj().T @ y0))
    assert np.linalg.norm(res.y - ref) <= 1e-10 * np.linalg.norm(ref)


def test_integrate_rejects_zero_steps():
    prob = IntegrationProblem(_linear(1.0), 0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        integrate(GBS86, None, prob, 0)


def test_weights_override_length():
    with pytest.raises(ValueError):
        macro_step(GBS86, PLAN6, _linear(1.0), 0.0, 1.0, 1.0, weights=[1.0])
