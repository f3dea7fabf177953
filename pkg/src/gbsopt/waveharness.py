"""Periodic one-way wave equation ``u_t + u_x = 0`` by the method of lines.

Spatial derivatives are spectral on ``[0, 1)``; time stepping runs close to
each method's own imaginary stability limit so that methods are compared at
equal stability-bounded cost.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .extrapolation import CATALOG_NAMES, ExtrapolationScheme, PartitionPlan, catalog_scheme, default_plan
from .gbs import ButcherTableau, classical_rk4, tableau_stability_polynomial
from .integrator import IntegrationProblem, InstabilityError, integrate
from .stability import isb, polynomial_evaluator, scheme_evaluator

__all__ = [
    "spectral_derivative",
    "initial_condition",
    "WaveMethod",
    "wave_method",
    "WaveRun",
    "convect",
    "convergence_study",
    "fit_slope",
    "error_floor",
    "write_study_csv",
]

log = logging.getLogger(__name__)


def spectral_derivative(u: np.ndarray) -> np.ndarray:
    """Derivative of the trigonometric interpolant of periodic samples on ``[0, 1)``.

    The Nyquist mode's derivative is set to zero, which keeps the operator
    real and skew-symmetric.
    """
    u = np.asarray(u, dtype=float)
    nx = u.shape[-1]
    if nx < 4 or nx % 2:
        raise ValueError("grid size must be even and >= 4")
    k = np.fft.rfftfreq(nx, d=1.0 / nx)
    mult = 2j * np.pi * k
    mult[-1] = 0.0
    return np.fft.irfft(mult * np.fft.rfft(u), n=nx)


def initial_condition(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * x))


@dataclass(frozen=True)
class WaveMethod:
    """A time integrator as seen by the wave experiment.

    Exactly one of ``scheme`` (extrapolated GBS) and ``tableau`` (one-step
    RK) is set. ``critical_path`` is the number of sequential function
    evaluations per step, used to normalize the time step.
    """

    name: str
    isb: float
    critical_path: int
    scheme: ExtrapolationScheme | None = None
    plan: PartitionPlan | None = None
    tableau: ButcherTableau | None = None

    def amplification(self, z: np.ndarray) -> np.ndarray:
        if self.scheme is not None:
            return scheme_evaluator(self.scheme)(z)
        return polynomial_evaluator(tableau_stability_polynomial(self.tableau))(z)


def wave_method(method: str | ExtrapolationScheme | ButcherTableau) -> WaveMethod:
    """Resolve a catalog name, ``"RK4"``, a scheme or an explicit tableau."""
    if isinstance(method, str):
        if method.upper() == "RK4":
            method = classical_rk4()
        elif method in CATALOG_NAMES:
            method = catalog_scheme(method)
        else:
            raise KeyError(f"unknown method {method!r}")
    if isinstance(method, ExtrapolationScheme):
        plan = default_plan(method)
        return WaveMethod(method.name, isb(scheme_evaluator(method)), plan.critical_path,
                          scheme=method, plan=plan)
    if isinstance(method, ButcherTableau):
        value = isb(polynomial_evaluator(tableau_stability_polynomial(method)))
        if value <= 0:
            raise ValueError(f"{method.name or 'tableau'} has no imaginary-axis stability")
        return WaveMethod(method.name or "RK", value, method.stages, tableau=method)
    raise TypeError(f"cannot use {type(method).__name__} as a wave method")


def _rk_integrate(tableau: ButcherTableau, rhs, y0, dt, steps: int, num=float):
    A = [[num(x) for x in row] for row in tableau.A]
    b = [num(x) for x in tableau.b]
    s = tableau.stages
    y = y0
    for _ in range(steps):
        k = []
        for i in range(s):
            yi = y
            for j in range(i):
                if A[i][j]:
                    yi = yi + dt * A[i][j] * k[j]
            k.append(rhs(0.0, yi))
        y = y + dt * sum(bi * ki for bi, ki in zip(b, k) if bi)
        if y.dtype != object and not np.all(np.isfinite(y)):
            raise InstabilityError("non-finite state")
    return y


class _HighPrecision:
    """Modal (Fourier-coefficient) state in mpmath arithmetic.

    Spectral differentiation is diagonal on the coefficients, so the method
    of lines is the same as in physical space; only the rounding differs.
    Used to see convergence slopes below the double-precision floor.
    """

    def __init__(self, nx: int, digits: int):
        import mpmath

        self.mp = mpmath.mp.clone() if hasattr(mpmath.mp, "clone") else mpmath.mp
        self.mp.dps = digits
        self.nx = nx
        mp = self.mp
        self.twiddle = [mp.expjpi(mp.mpf(2 * m) / nx) for m in range(nx)]
        self.modes = nx // 2 + 1
        mult = [mp.mpc(0, -2) * mp.pi * k for k in range(self.modes)]
        mult[-1] = mp.mpc(0)
        self.mult = np.array(mult, dtype=object)

    def num(self, x):
        """Exact conversion of a Fraction or float."""
        if isinstance(x, Fraction):
            return self.mp.mpf(x.numerator) / x.denominator
        return self.mp.mpf(x)

    def default_samples(self) -> list:
        return [(1 - tw.real) / 2 for tw in self.twiddle]

    def analyze(self, u) -> np.ndarray:
        nx, tw = self.nx, self.twiddle
        u = [v if isinstance(v, self.mp.mpf) else self.num(float(v)) for v in u]
        out = [sum((u[j] * tw[(-k * j) % nx] for j in range(nx)), self.mp.mpc(0)) / nx
               for k in range(self.modes)]
        return np.array(out, dtype=object)

    def synthesize(self, c) -> np.ndarray:
        nx, tw = self.nx, self.twiddle
        w = [1] + [2] * (self.modes - 2) + [1]
        return np.array([sum((wk * (ck * tw[(k * j) % nx]).real for k, (wk, ck) in enumerate(zip(w, c))),
                             self.mp.mpf(0)) for j in range(nx)], dtype=object)

    def rhs(self, t, c):
        # u_t = -u_x
        return self.mult * c


@dataclass
class WaveRun:
    method: str
    nx: int
    sigma: float
    dt: float
    dx: float
    steps: int
    dt_normalized: float
    error: float
    error_rms: float
    stable: bool
    max_amplification: float
    slope: float = float("nan")

    def to_json(self) -> dict:
        return asdict(self)


def convect(
    method: str | ExtrapolationScheme | ButcherTableau | WaveMethod,
    nx: int,
    sigma: float = 0.99,
    max_workers: int | None = 1,
    u0=None,
    precision: int | None = None,
    weights: str = "exact",
) -> WaveRun:
    """Advect one full period at ``dt = sigma * ISB * dx / pi``.

    The step count is rounded up to an integer and ``dt`` shrunk so that the
    steps land exactly on ``t = 1``. The error is the max-abs difference to
    the exact solution, which after one period equals the initial data. A
    run that blows up (non-finite state, or error above the data's size) is
    returned with ``stable = False`` rather than raising.

    ``precision`` (decimal digits) switches to mpmath arithmetic on the
    Fourier coefficients; ``weights`` then chooses whether the extrapolation
    weights are the exact rationals or their double-precision roundings.
    """
    m = method if isinstance(method, WaveMethod) else wave_method(method)
    if nx < 4 or nx & (nx - 1):
        raise ValueError("grid size must be a power of two >= 4")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    dx = 1.0 / nx
    x = np.arange(nx) * dx
    u_init = initial_condition(x) if u0 is None else np.asarray(u0(x) if callable(u0) else u0, dtype=float)
    steps = math.ceil(1.0 / (sigma * m.isb * dx / math.pi))
    dt = 1.0 / steps

    def rhs(t, u):
        return -spectral_derivative(u)

    k = np.arange(1, nx // 2)
    amp = float(np.max(np.abs(m.amplification(-2j * np.pi * k * dt)))) if k.size else 1.0
    if precision is not None:
        samples = None if u0 is None else u_init
        error, error_rms = _convect_high_precision(m, nx, samples, steps, precision, weights, max_workers)
    else:
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                if m.scheme is not None:
                    problem = IntegrationProblem(rhs, 0.0, u_init, 1.0)
                    u = integrate(m.scheme, m.plan, problem, steps, max_workers=max_workers).y
                else:
                    u = _rk_integrate(m.tableau, rhs, u_init, dt, steps)
                error = float(np.max(np.abs(u - u_init)))
                error_rms = float(np.sqrt(np.mean((u - u_init) ** 2)))
        except InstabilityError:
            error = error_rms = math.inf
    scale = max(1.0, float(np.max(np.abs(u_init))))
    stable = bool(np.isfinite(error) and error <= scale)
    if not np.isfinite(error):
        error = error_rms = math.inf
    return WaveRun(m.name, nx, sigma, dt, dx, steps, dt / m.critical_path, error, error_rms, stable, amp)


def _convect_high_precision(m: WaveMethod, nx, u_init, steps, digits, weights, max_workers):
    if weights not in ("exact", "double"):
        raise ValueError("weights must be 'exact' or 'double'")
    hp = _HighPrecision(nx, digits)
    c0 = hp.analyze(hp.default_samples() if u_init is None else u_init)
    one = hp.num(1)
    if m.scheme is not None:
        rational = m.scheme.weights if weights == "exact" else [Fraction(float(c)) for c in m.scheme.weights]
        w = [hp.num(c) for c in rational]
        problem = IntegrationProblem(hp.rhs, hp.num(0), c0, one)
        c = integrate(m.scheme, m.plan, problem, steps, max_workers=max_workers, weights=w).y
    else:
        c = _rk_integrate(m.tableau, hp.rhs, c0, one / steps, steps, num=hp.num)
    e = hp.synthesize(c - c0)
    return float(max(abs(v) for v in e)), float(hp.mp.sqrt(sum(v * v for v in e) / nx))


def fit_slope(dt: Sequence[float], error: Sequence[float]) -> float:
    """Least-squares slope of ``log(error)`` against ``log(dt)``."""
    if len(dt) < 2:
        return float("nan")
    slope, _ = np.polyfit(np.log(np.asarray(dt)), np.log(np.asarray(error)), 1)
    return float(slope)


def error_floor(errors: Sequence[float], rel_spread: float = 10.0) -> float:
    """Rounding floor: geometric mean of the smallest errors within ``rel_spread`` of the minimum.

    Errors that have stopped decreasing with refinement sit within a small
    factor of each other; the floor is their typical size.
    """
    e = np.asarray([v for v in errors if v > 0 and np.isfinite(v)])
    if e.size == 0:
        return 0.0
    low = e[e <= rel_spread * e.min()]
    return float(np.exp(np.mean(np.log(low))))


def _reached_floor(runs: list[WaveRun], ratio: float = 4.0) -> bool:
    """True once refining stops paying: the finest stable error fell by less than ``ratio``."""
    e = [r.error for r in sorted(runs, key=lambda r: -r.dt) if r.stable]
    return len(e) >= 2 and e[-1] * ratio > e[-2]


def _pre_floor(runs: list[WaveRun], floor: float, factor: float = 100.0) -> list[WaveRun]:
    """Runs before the floor: error above ``factor * floor`` and still decreasing."""
    out = []
    for r in sorted(runs, key=lambda r: -r.dt):
        if not (r.stable and r.error > factor * floor):
            break
        if out and r.error >= out[-1].error:
            break
        out.append(r)
    return out


def convergence_study(
    methods: Sequence,
    grids: Sequence[int],
    sigma: float = 0.99,
    max_workers: int | None = 1,
    precision: int | None = None,
    weights: str = "exact",
) -> list[WaveRun]:
    """Run every method on every grid and attach the pre-floor slope.

    The slope uses the runs whose error is more than 100 times the method's
    observed floor (all decreasing runs when no floor is reached); every run of a method carries the same slope value.
    """
    if len(grids) < 3:
        raise ValueError("a convergence study needs at least three grids")
    out: list[WaveRun] = []
    for method in methods:
        m = method if isinstance(method, WaveMethod) else wave_method(method)
        runs = [convect(m, nx, sigma, max_workers=max_workers, precision=precision, weights=weights)
                for nx in sorted(grids)]
        floor = error_floor([r.error for r in runs if r.stable]) if _reached_floor(runs) else 0.0
        seg = _pre_floor(runs, floor)
        slope = fit_slope([r.dt for r in seg], [r.error for r in seg]) if len(seg) >= 2 else float("nan")
        for r in runs:
            r.slope = slope
        log.info("%s: slope %.3f over %d runs, floor %.3g", m.name, slope, len(seg), floor)
        out.extend(runs)
    return out


def write_study_csv(runs: Sequence[WaveRun], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "Nx", "dt", "dt_normalized", "error", "slope"])
        for r in runs:
            w.writerow([r.method, r.nx, f"{r.dt:.17g}", f"{r.dt_normalized:.17g}",
                        f"{r.error:.17g}", f"{r.slope:.17g}"])
