"""Imaginary stability boundaries, stability-domain boundaries and phase errors."""

from __future__ import annotations

import csv
import json
import logging
import warnings
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .extrapolation import ExtrapolationScheme, PartitionPlan, default_plan, verify_order
from .gbs import RK4_ISB, gbs_evaluate
from .numkernel import RationalPolynomial, series_log_inverse

__all__ = [
    "ISB_TOL",
    "polynomial_evaluator",
    "components_evaluator",
    "scheme_evaluator",
    "isb",
    "scheme_isb",
    "StabilityReport",
    "normalized_isb",
    "boundary_scan",
    "leading_error",
    "leading_error_exact",
    "write_boundary_csv",
]

log = logging.getLogger(__name__)

ISB_TOL = 1e-10
Evaluator = Callable[[np.ndarray], np.ndarray]


def polynomial_evaluator(poly: RationalPolynomial) -> Evaluator:
    """Double-precision Horner evaluator. Fine for low degree only."""
    coeffs = poly.to_float_array()[::-1]

    def evaluate(z):
        return np.polyval(coeffs, np.asarray(z, dtype=complex))

    evaluate.degree = poly.degree
    return evaluate


def components_evaluator(step_counts: Sequence[int], weights: Sequence[float]) -> Evaluator:
    """``sum_i w_i P_{n_i}(z)``, each ``P`` by its GBS recursion.

    Terms are accumulated in the order given, so results do not depend on
    anything but the inputs.
    """
    counts = [int(n) for n in step_counts]
    w = [float(c) for c in weights]

    def evaluate(z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros_like(z)
        for n, c in zip(counts, w):
            out = out + c * gbs_evaluate(n, z)
        return out

    evaluate.degree = max(counts) + 1
    return evaluate


def scheme_evaluator(scheme: ExtrapolationScheme) -> Evaluator:
    return components_evaluator(scheme.step_counts, scheme.float_weights)


def _excess(evaluator: Evaluator, y: np.ndarray) -> np.ndarray:
    vals = np.abs(evaluator(1j * np.asarray(y, dtype=float)))
    if not np.all(np.isfinite(vals)):
        bad = np.asarray(y)[~np.isfinite(vals)]
        raise FloatingPointError(f"non-finite stability polynomial value near y = {bad.flat[0]:g}")
    return vals - 1.0


def _grows_from_origin(evaluator: Evaluator, y_star: float) -> bool:
    """True when ``|R(iy)| - 1`` is positive and shrinking toward the origin.

    This is how a domain that touches the axis only at 0 shows up: the
    tolerance hides the first violation until ``y`` is of order ``tol**(1/k)``.
    Rounding noise in a genuinely stable scheme does not decay geometrically,
    so it is not mistaken for this pattern.
    """
    probes = y_star * np.array([0.5, 0.25, 0.125])
    e = _excess(evaluator, probes)
    eps = 64 * np.finfo(float).eps
    return bool(e[2] > eps and e[1] >= 2 * e[2] and e[0] >= 2 * e[1])


def isb(
    evaluator: Evaluator,
    tol: float = ISB_TOL,
    y_max: float | None = None,
    dense_samples: int = 10_000,
    xtol: float = 1e-12,
) -> float:
    """Imaginary stability boundary of a stability function.

    Returns the largest ``y*`` with ``|R(iy)| <= 1 + tol`` on ``[0, y*]``.
    A coarse scan over ``[0, y_max]`` gives an estimate, a dense scan with
    step ``estimate / dense_samples`` finds the first violation, and
    bisection refines it to ``xtol``.

    ``y_max`` defaults to the evaluator's ``degree`` attribute plus one (an
    explicit method's ISB never exceeds its degree), or 100.
    """
    if y_max is None:
        y_max = float(getattr(evaluator, "degree", 99)) + 1.0
    coarse = np.linspace(0.0, y_max, 2001)[1:]
    bad = np.nonzero(_excess(evaluator, coarse) > tol)[0]
    if bad.size == 0:
        warnings.warn(f"no axis violation found up to y_max = {y_max}", stacklevel=2)
        return float(y_max)
    estimate = coarse[bad[0]]
    dense = np.linspace(0.0, estimate, dense_samples + 1)[1:]
    bad = np.nonzero(_excess(evaluator, dense) > tol)[0]
    hi = dense[bad[0]]
    lo = dense[bad[0] - 1] if bad[0] > 0 else 0.0
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        if _excess(evaluator, np.array([mid]))[0] > tol:
            hi = mid
        else:
            lo = mid
    if _grows_from_origin(evaluator, hi):
        return 0.0
    return float(lo)


def scheme_isb(scheme: ExtrapolationScheme, tol: float = ISB_TOL) -> float:
    return isb(scheme_evaluator(scheme), tol=tol)


@dataclass
class StabilityReport:
    isb: float
    isb_normalized: float
    critical_path_evals: int
    a_p1: float
    a_p2: float
    rk4_ratio: float
    name: str = ""
    order: int = 0
    boundary: list[complex] = field(default_factory=list)

    def to_json(self) -> dict:
        out = asdict(self)
        out["boundary"] = [[z.real, z.imag] for z in self.boundary]
        return out

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")


def normalized_isb(
    scheme: ExtrapolationScheme,
    plan: PartitionPlan | None = None,
    tol: float = ISB_TOL,
    with_boundary: bool = False,
    resolution: int = 256,
) -> StabilityReport:
    """ISB of the combined polynomial, normalized by the plan's critical path."""
    plan = plan or default_plan(scheme)
    if not plan.covers(scheme.step_counts):
        raise ValueError("partition plan does not cover the scheme's step counts")
    evaluator = scheme_evaluator(scheme)
    value = isb(evaluator, tol=tol)
    a_p1, a_p2 = leading_error(scheme)
    boundary = boundary_scan(evaluator, resolution) if with_boundary else []
    return StabilityReport(
        isb=value,
        isb_normalized=value / plan.critical_path,
        critical_path_evals=plan.critical_path,
        a_p1=a_p1,
        a_p2=a_p2,
        rk4_ratio=value / RK4_ISB,
        name=scheme.name,
        order=scheme.order,
        boundary=boundary,
    )


def _real_extent(evaluator: Evaluator, r_max: float, steps: int) -> float:
    x = np.linspace(0.0, r_max, steps + 1)[1:]
    out = np.abs(evaluator(-x)) > 1.0
    idx = np.nonzero(out)[0]
    return float(x[idx[0]]) if idx.size else r_max


def boundary_scan(
    evaluator: Evaluator,
    resolution: int = 256,
    seed: complex | None = None,
    r_max: float | None = None,
    steps: int = 2000,
) -> list[complex]:
    """Trace ``|R| = 1`` by root finding along rays from an interior seed.

    ``resolution`` rays cover the upper half plane; the lower half is the
    mirror image (real coefficients). Each ray is sampled outward until
    ``|R|`` first exceeds one and the crossing is refined with Brent's
    method. The seed defaults to a point just left of the origin, which sits
    inside every consistent method's domain. Returns the closed polyline
    ordered counter-clockwise from the positive real direction.
    """
    if resolution < 64:
        raise ValueError("resolution must be at least 64")
    if r_max is None:
        r_max = 2.0 * float(getattr(evaluator, "degree", 20)) + 2.0
    if seed is None:
        extent = _real_extent(evaluator, r_max, steps)
        seed = -min(1e-2, 0.5 * extent)
    seed = complex(seed)
    if abs(evaluator(np.array([seed]))[0]) > 1.0:
        warnings.warn("boundary seed lies outside the stability domain; empty boundary", stacklevel=2)
        return []

    def f(r, d):
        return abs(evaluator(np.array([seed + r * d]))[0]) - 1.0

    angles = np.linspace(0.0, np.pi, resolution + 1)
    radii = np.linspace(0.0, r_max, steps + 1)[1:]
    upper = []
    for theta in angles:
        d = np.exp(1j * theta)
        vals = np.abs(evaluator(seed + radii * d)) - 1.0
        idx = np.nonzero(vals > 0)[0]
        if idx.size == 0:
            continue
        k = idx[0]
        lo = radii[k - 1] if k > 0 else 0.0
        r = brentq(f, lo, radii[k], args=(d,), xtol=1e-14, rtol=1e-15)
        upper.append(seed + r * d)
    if not upper:
        warnings.warn("degenerate stability domain; empty boundary", stacklevel=2)
        return []
    lower = [z.conjugate() for z in reversed(upper) if abs(z.imag) > 0]
    return upper + lower


def write_boundary_csv(points: Sequence[complex], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["re", "im"])
        for z in points:
            writer.writerow([f"{z.real:.17g}", f"{z.imag:.17g}"])


def leading_error_exact(
    scheme: ExtrapolationScheme | RationalPolynomial, order: int | None = None
) -> tuple[Fraction, Fraction]:
    """Exact ``(a_{p+1}, a_{p+2})`` of the inverted phase series.

    With ``R(xi) = exp(i theta)`` inverted as
    ``xi(theta) = i theta + i a_{p+1} theta**(p+1) - a_{p+2} theta**(p+2) + ...``.
    """
    if isinstance(scheme, RationalPolynomial):
        poly = scheme
        if order is None:
            raise ValueError("order is required for a bare polynomial")
    else:
        poly, order = scheme.polynomial, scheme.order
    if verify_order(poly) != order:
        raise ValueError(f"polynomial has order {verify_order(poly)}, expected {order}")
    coeffs = series_log_inverse(poly, order + 2)
    c1, c2 = coeffs[order + 1], coeffs[order + 2]
    # For p divisible by 4 the theta**(p+1) term is i*a and theta**(p+2) is -a.
    if c1.re != 0 or c2.im != 0:
        log.warning("phase series has unexpected components: %r, %r", c1, c2)
    return c1.im, -c2.re


def leading_error(scheme, order: int | None = None) -> tuple[float, float]:
    a1, a2 = leading_error_exact(scheme, order)
    return float(a1), float(a2)
