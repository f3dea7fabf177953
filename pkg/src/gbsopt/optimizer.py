"""Free-weight optimization of extrapolated GBS schemes.

For a trial step ``h`` the convex subproblem minimizes
``max_{lambda in contour} |R(h*lambda)| - 1`` over the free weights, the
dependent weights being eliminated through the order constraints so the
problem is unconstrained. The largest ``h`` with a nonpositive optimum is
then found by bisection.

Two solvers are provided: an exact second-order-cone model (default) and a
linear program that replaces each modulus constraint by a regular polygon
of half-planes, refined with tangent cuts at the current argument.
"""

from __future__ import annotations

import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .extrapolation import (
    ExtrapolationScheme,
    PartitionPlan,
    _check_counts,
    _check_order,
    default_plan,
    dependent_map,
    make_scheme,
)
from .gbs import gbs_evaluate
from .stability import isb, scheme_evaluator

__all__ = [
    "ContourSpec",
    "imaginary_axis",
    "imaginary_with_bulge",
    "FreeWeightBasis",
    "SubproblemResult",
    "convex_subproblem",
    "OptimizedScheme",
    "maximize_h",
    "rationalize",
    "rationalize_weights",
    "rationalize_scheme",
    "SolverError",
    "SearchResult",
    "search_fully_determined",
]

log = logging.getLogger(__name__)

FEAS_TOL = 1e-8
AXIS_SAMPLES = 512
BULGE_SAMPLES = 128


class SolverError(RuntimeError):
    """The convex solver failed to return a usable iterate."""


@dataclass(frozen=True)
class ContourSpec:
    """Curve along which ``|R| <= 1`` is enforced, upper half plane only.

    The imaginary segment is stored normalized (``i*t`` for ``t`` in
    ``(0, 1]``) and scaled by ``h``. The optional bulge is the rectangle
    ``[0, eps_r] x [0, beta*h]``: its real extent is absolute, its height
    scales with ``h``. By the maximum modulus principle it suffices to
    constrain the rectangle's top and right edges together with the axis.
    """

    kind: str = "imaginary_axis"
    axis_t: tuple[float, ...] = field(default_factory=tuple)
    eps_r: float = 0.0
    beta: float = 0.0
    bulge_samples: int = 0

    def __post_init__(self):
        if self.kind not in ("imaginary_axis", "imaginary_with_real_bulge"):
            raise ValueError(f"unknown contour kind {self.kind!r}")
        if len(self.axis_t) < 128:
            raise ValueError("contour needs at least 128 axis samples")
        if not math.isclose(max(self.axis_t), 1.0):
            raise ValueError("contour must include the axis endpoint i")
        if self.kind == "imaginary_with_real_bulge":
            if self.eps_r < 0 or self.beta <= 0 or self.bulge_samples < 2:
                raise ValueError("bulge needs eps_r >= 0, beta > 0 and samples")

    def points(self, h: float, density: int = 1) -> np.ndarray:
        """Contour points ``z = h*lambda``; ``density > 1`` refines every piece."""
        t = np.asarray(self.axis_t)
        if density > 1:
            t = np.linspace(0.0, 1.0, density * len(t) + 1)[1:]
        z = 1j * h * t
        if self.kind == "imaginary_with_real_bulge" and self.eps_r > 0:
            n = density * self.bulge_samples
            m = n // 2
            top = np.linspace(0.0, self.eps_r, m + 1)[1:] + 1j * self.beta * h
            right = self.eps_r + 1j * self.beta * h * np.linspace(0.0, 1.0, n - m + 1)[:-1]
            z = np.concatenate([z, top, right])
        return z

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "samples": len(self.axis_t),
            "eps_r": self.eps_r,
            "beta": self.beta,
            "bulge_samples": self.bulge_samples,
        }


def imaginary_axis(samples: int = AXIS_SAMPLES) -> ContourSpec:
    t = np.arange(1, samples + 1) / samples
    return ContourSpec("imaginary_axis", tuple(t))


def imaginary_with_bulge(eps_r: float, beta: float, samples: int = AXIS_SAMPLES,
                         bulge_samples: int = BULGE_SAMPLES) -> ContourSpec:
    t = np.arange(1, samples + 1) / samples
    return ContourSpec("imaginary_with_real_bulge", tuple(t), float(eps_r), float(beta), bulge_samples)


class FreeWeightBasis:
    """``R(z) = R0(z) + sum_j c_free[j] * Q_j(z)`` with order constraints eliminated.

    ``R0`` is the square scheme on the dependent counts and each ``Q_j``
    combines one free component with the dependent correction it forces.
    Every ``P_i`` is evaluated by its GBS recursion.
    """

    def __init__(self, step_counts: Sequence[int], p: int, n_dep: Sequence[int] | None = None):
        self.order = _check_order(p)
        counts = sorted(_check_counts(step_counts))
        if len(counts) < p // 2:
            raise ValueError(f"order {p} needs at least {p // 2} step counts")
        if n_dep is None:
            n_dep = counts[-(p // 2):]
        self.n_dep = tuple(int(n) for n in n_dep)
        if len(self.n_dep) != p // 2 or not set(self.n_dep) <= set(counts):
            raise ValueError("n_dep must be p/2 of the step counts")
        self.n_free = tuple(n for n in counts if n not in self.n_dep)
        base, M = dependent_map(self.n_dep, self.n_free, p)
        self.base = np.array([float(b) for b in base])
        self.M = np.array([[float(x) for x in row] for row in M]).reshape(len(self.n_dep), len(self.n_free))

    @property
    def step_counts(self) -> tuple[int, ...]:
        return tuple(sorted(self.n_dep + self.n_free))

    @property
    def n_max(self) -> int:
        return max(self.step_counts)

    def evaluate(self, z) -> tuple[np.ndarray, np.ndarray]:
        z = np.asarray(z, dtype=complex)
        p_dep = np.array([gbs_evaluate(n, z) for n in self.n_dep])
        r0 = self.base @ p_dep
        if not self.n_free:
            return r0, np.zeros((0, z.size), dtype=complex)
        p_free = np.array([gbs_evaluate(n, z) for n in self.n_free])
        return r0, p_free + self.M.T @ p_dep

    def scheme(self, c_free: Sequence, name: str = "") -> ExtrapolationScheme:
        """Exact scheme whose free weights are the binary values of ``c_free``."""
        c = [x if isinstance(x, Fraction) else Fraction(float(x)) for x in c_free]
        return make_scheme(self.order, self.step_counts, c_free=c, n_dep=self.n_dep, name=name)


@dataclass
class SubproblemResult:
    c_free: np.ndarray
    r: float
    solver_r: float
    status: str


def _modulus_excess(basis: FreeWeightBasis, z, c) -> np.ndarray:
    r0, q = basis.evaluate(z)
    return np.abs(r0 + c @ q) - 1.0


def _orthonormal(q):
    """``Q^T = A T`` with ``[Re A; Im A]`` orthonormal, so ``Q^T c = A (T c)``."""
    S = q.shape[1]
    U, T = np.linalg.qr(np.vstack([q.T.real, q.T.imag]))
    return U[:S] + 1j * U[S:], T


def _solve_socp(r0, q):
    import cvxpy as cp

    # Columns of Q span many orders of magnitude near the optimum; solve in
    # an orthonormal basis and map back.
    A, T = _orthonormal(q)
    k = q.shape[0]
    d = cp.Variable(k)
    r = cp.Variable()
    re = r0.real + A.real @ d
    im = r0.imag + A.imag @ d
    prob = cp.Problem(cp.Minimize(r), [cp.norm(cp.vstack([re, im]), axis=0) <= 1 + r])
    try:
        with warnings.catch_warnings():
            # "inaccurate" statuses are judged by re-evaluating r instead.
            warnings.simplefilter("ignore", UserWarning)
            prob.solve(solver="CLARABEL", tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10, max_iter=500)
    except cp.error.SolverError as exc:
        raise SolverError(str(exc)) from exc
    if d.value is None:
        raise SolverError(f"cone solver returned no iterate (status {prob.status})")
    c = np.linalg.solve(T, np.asarray(d.value, dtype=float))
    return c, float(r.value), str(prob.status)


def _solve_lp(r0, q, n_gon: int = 32, cut_rounds: int = 30):
    from scipy.optimize import linprog

    A_, T = _orthonormal(q)
    q = A_.T
    k, S = q.shape
    rows, rhs = [], []

    def add(d, idx):
        A = np.hstack([(d[:, None] * q[:, idx].T).real, -np.ones((idx.size, 1))])
        b = 1.0 - (d * r0[idx]).real
        s = np.linalg.norm(A, axis=1)
        rows.append(A / s[:, None])
        rhs.append(b / s)

    theta = 2 * np.pi * np.arange(n_gon) / n_gon
    add(np.repeat(np.exp(-1j * theta), S), np.tile(np.arange(S), n_gon))
    cost = np.zeros(k + 1)
    cost[-1] = 1.0
    status = "optimal"
    for _ in range(cut_rounds):
        res = linprog(cost, A_ub=np.vstack(rows), b_ub=np.concatenate(rhs),
                      bounds=[(None, None)] * k + [(-1.0, None)], method="highs")
        if res.x is None:
            raise SolverError(f"LP solver failed: {res.message}")
        c, r_lp = res.x[:k], res.x[-1]
        val = r0 + c @ q
        excess = np.abs(val) - 1.0
        viol = np.nonzero(excess > r_lp + 1e-12)[0]
        if viol.size == 0:
            break
        add(np.exp(-1j * np.angle(val[viol])), viol)
    else:
        status = "cut limit"
    return np.linalg.solve(T, c), float(r_lp), status


def convex_subproblem(
    h: float,
    contour: ContourSpec,
    step_counts: Sequence[int] | FreeWeightBasis,
    p: int | None = None,
    method: str = "socp",
    candidates: Sequence[np.ndarray] = (),
    refine: int = 16,
    max_rounds: int = 25,
    feas_tol: float = FEAS_TOL,
) -> SubproblemResult:
    """Minimize ``max |R(h*lambda)| - 1`` over the free weights.

    The returned ``r`` is re-evaluated from the solution (not the solver's
    objective value), so it is the true minimax value at the returned
    weights over the contour samples. Extra ``candidates`` (for example the
    solution at a smaller ``h``) are evaluated as well, together with
    ``c_free = 0``, and the best point is returned; this guards against solver inaccuracy at small ``h``,
    where every ``Q_j`` is ``O(h**(p+1))`` and the problem is nearly flat.

    With ``refine > 0`` the solution is checked on a contour ``refine`` times
    denser; violated local maxima are added as constraints and the problem
    is re-solved (at most ``max_rounds`` times). ``r`` then bounds the
    excess on the dense contour too, which keeps the measured ISB of the
    emitted scheme close to ``h`` instead of leaking between samples.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    basis = step_counts if isinstance(step_counts, FreeWeightBasis) else FreeWeightBasis(step_counts, p)
    if method not in ("socp", "lp"):
        raise ValueError(f"unknown method {method!r}")
    z = contour.points(h)
    r0, q = basis.evaluate(z)
    if not basis.n_free:
        r = float(np.max(np.abs(r0)) - 1.0)
        return SubproblemResult(np.zeros(0), r, r, "determined")
    if refine:
        zd = contour.points(h, density=refine)
        r0d, qd = basis.evaluate(zd)

    def true_r(x, a, b):
        with np.errstate(over="ignore", invalid="ignore"):
            v = np.abs(a + x @ b) - 1.0
        v[~np.isfinite(v)] = np.inf
        return v

    for _ in range(max_rounds):
        c, solver_r, status = (_solve_socp if method == "socp" else _solve_lp)(r0, q)
        if not refine:
            break
        excess = true_r(c, r0d, qd)
        if excess.max() <= max(solver_r, 0.0) + feas_tol:
            break
        # Exchange step: add the violated local maxima of the dense scan.
        peaks = np.nonzero((excess > max(solver_r, 0.0) + feas_tol)
                           & (excess >= np.roll(excess, 1)) & (excess >= np.roll(excess, -1)))[0]
        peaks = peaks[np.argsort(excess[peaks])[::-1][:64]]
        r0 = np.concatenate([r0, r0d[peaks]])
        q = np.hstack([q, qd[:, peaks]])
    else:
        status += " (refinement cap)"

    def worst(x):
        v = true_r(x, r0, q).max()
        return max(v, true_r(x, r0d, qd).max()) if refine else v

    r = float(worst(c))
    # The square scheme (c_free = 0) is always admissible and wins at small h.
    for cand in (np.zeros(len(basis.n_free)), *candidates):
        cand = np.asarray(cand, dtype=float)
        rc = float(worst(cand))
        if rc < r:
            c, r, status = cand, rc, status + " (candidate)"
    return SubproblemResult(c, r, solver_r, status)


@dataclass
class OptimizedScheme:
    scheme: ExtrapolationScheme
    h: float
    r: float
    isb: float
    isb_normalized: float
    critical_path: int
    c_free_float: np.ndarray
    trajectory: list[tuple[float, float]] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "scheme": self.scheme.to_json(),
            "h": self.h,
            "r": self.r,
            "isb": self.isb,
            "isb_normalized": self.isb_normalized,
            "critical_path": self.critical_path,
            "c_free_float": [float(x) for x in self.c_free_float],
        }


def maximize_h(
    contour: ContourSpec,
    step_counts: Sequence[int],
    p: int,
    tol_h: float = 1e-5,
    n_dep: Sequence[int] | None = None,
    plan: PartitionPlan | None = None,
    method: str = "socp",
    feas_tol: float = FEAS_TOL,
    refine: int = 16,
    name: str = "",
) -> OptimizedScheme:
    """Largest step ``h`` with ``r(h) <= feas_tol``, found by bisection.

    ``tol_h`` is relative. The bracket starts at ``N_max + 1``, beyond which
    no explicit method of this degree is stable, and at a small ``h`` that
    must be feasible; infeasibility there means the order constraints are
    broken. The achieved ISB is measured on the resulting scheme, not taken
    from ``h``.
    """
    if tol_h <= 0:
        raise ValueError("tol_h must be positive")
    basis = FreeWeightBasis(step_counts, p, n_dep)
    trajectory: list[tuple[float, float]] = []
    zero = np.zeros(len(basis.n_free))

    def solve(h, best):
        res = convex_subproblem(h, contour, basis, method=method, candidates=(zero, best.c_free),
                                refine=refine, feas_tol=feas_tol)
        trajectory.append((h, res.r))
        return res

    # c_free = 0 is the square scheme on n_dep: feasible up to its own ISB.
    tiny = convex_subproblem(1e-2, contour, basis, method=method, candidates=(zero,), refine=0)
    if tiny.r > feas_tol:
        raise SolverError("infeasible as h -> 0; order constraints are inconsistent")
    square = basis.scheme(zero)
    lo = max(isb(scheme_evaluator(square)), 1e-2)
    hi = float(basis.n_max + 1)
    best = SubproblemResult(zero, float(np.max(_modulus_excess(basis, contour.points(lo), zero))), 0.0, "square")
    if best.r > feas_tol:
        lo, best = 1e-2, tiny
    top = solve(hi, best)
    if top.r <= feas_tol:
        lo, best = hi, top
    else:
        while hi - lo > tol_h * lo:
            mid = 0.5 * (lo + hi)
            res = solve(mid, best)
            if res.r <= feas_tol:
                lo, best = mid, res
            else:
                hi = mid
    _check_monotone(trajectory, feas_tol)
    scheme = basis.scheme(best.c_free, name=name or f"OPT{p}_N{basis.n_max}")
    plan = plan or default_plan(scheme)
    value = isb(scheme_evaluator(scheme))
    return OptimizedScheme(
        scheme=scheme,
        h=lo,
        r=best.r,
        isb=value,
        isb_normalized=value / plan.critical_path,
        critical_path=plan.critical_path,
        c_free_float=np.asarray(best.c_free, dtype=float),
        trajectory=trajectory,
    )


def _check_monotone(trajectory, feas_tol) -> int:
    """Log feasibility flips: an infeasible ``h`` below a feasible one."""
    flips = 0
    pts = sorted(trajectory)
    for (h1, r1), (h2, r2) in zip(pts, pts[1:]):
        if r1 > feas_tol and r2 <= feas_tol:
            flips += 1
            log.warning("r(h) not monotone: r(%.8g) = %.3g but r(%.8g) = %.3g", h1, r1, h2, r2)
    return flips


def rationalize(x: float, rel_tol: float) -> Fraction:
    """Continued-fraction convergent of ``x`` with the smallest denominator within ``rel_tol``."""
    if not 0 < rel_tol <= 1e-2:
        raise ValueError("rel_tol must lie in (0, 1e-2]")
    if isinstance(x, Fraction):
        return x
    if x == 0:
        return Fraction(0)
    target = Fraction(float(x))
    sign = -1 if target < 0 else 1
    rest = abs(target)
    p0, q0, p1, q1 = 0, 1, 1, 0
    while True:
        a = math.floor(rest)
        p0, q0, p1, q1 = p1, q1, a * p1 + p0, a * q1 + q0
        approx = Fraction(p1, q1)
        if abs(approx - abs(target)) <= rel_tol * abs(target):
            return sign * approx
        frac = rest - a
        if frac == 0:
            return sign * approx
        rest = 1 / frac


def rationalize_weights(c_free: Sequence[float], rel_tol: float) -> list[Fraction]:
    return [rationalize(x, rel_tol) for x in c_free]


def rationalize_scheme(
    opt: OptimizedScheme | ExtrapolationScheme,
    rel_tol: float | None = None,
    plan: PartitionPlan | None = None,
    name: str | None = None,
    max_loss: float = 0.005,
) -> tuple[ExtrapolationScheme, float, float]:
    """Replace the free weights by nearby small rationals and re-solve ``c_dep``.

    With ``rel_tol`` given, every free weight is rounded to its simplest
    convergent within that tolerance. Otherwise tolerances ``1e-2, 1e-3,
    ...`` are tried in turn and the first (smallest denominators) whose
    ISBn loss is at most ``max_loss`` relative is kept. The weights cancel
    heavily, so useful tolerances are often far below the weights' own
    size.

    Returns ``(scheme, isbn_before, isbn_after)``.
    """
    src = opt.scheme if isinstance(opt, OptimizedScheme) else opt
    plan = plan or default_plan(src)
    if isinstance(opt, OptimizedScheme):
        before, values = opt.isb_normalized, opt.c_free_float
    else:
        before, values = isb(scheme_evaluator(src)) / plan.critical_path, src.c_free

    def attempt(tol):
        scheme = src.with_free_weights(rationalize_weights(values, tol), name=name or src.name)
        return scheme, isb(scheme_evaluator(scheme)) / plan.critical_path

    if rel_tol is not None:
        scheme, after = attempt(rel_tol)
        return scheme, before, after
    for k in range(2, 16):
        scheme, after = attempt(10.0 ** -k)
        if after >= before * (1 - max_loss):
            break
    else:
        scheme, after = src, before
    log.info("rationalized at rel_tol 1e-%d: ISBn %.6f -> %.6f", k, before, after)
    return scheme, before, after


@dataclass
class SearchResult:
    """Best fully-determined scheme of a given order, plus the runners-up."""

    order: int
    max_count: int
    best: ExtrapolationScheme
    isb: float
    isb_normalized: float
    ranking: list[tuple[float, tuple[int, ...]]]

    def to_json(self) -> dict:
        return {
            "order": self.order,
            "max_count": self.max_count,
            "step_counts": list(self.best.step_counts),
            "scheme": self.best.to_json(),
            "isb": self.isb,
            "isb_normalized": self.isb_normalized,
            "ranking": [{"step_counts": list(c), "isb_normalized": v} for v, c in self.ranking],
        }


def search_fully_determined(
    order: int,
    max_count: int = 24,
    max_combinations: int = 20_000,
    keep: int = 10,
) -> SearchResult:
    """Exhaustive search over ``order/2`` even step counts up to ``max_count``.

    Each combination fixes a unique square scheme; it is scored by
    ``ISB / (N_max + 1)``, the critical path of its folded core plan. Raises
    when the number of combinations exceeds ``max_combinations``.
    """
    order = _check_order(order)
    pool = range(2, int(max_count) + 1, 2)
    k = order // 2
    total = math.comb(len(pool), k)
    if total == 0:
        raise ValueError(f"max_count {max_count} leaves fewer than {k} step counts")
    if total > max_combinations:
        raise ValueError(f"{total} combinations exceed the cap of {max_combinations}")
    scored = []
    for combo in itertools.combinations(pool, k):
        scheme = make_scheme(order, combo)
        value = isb(scheme_evaluator(scheme))
        scored.append((value / (max(combo) + 1), value, combo, scheme))
    scored.sort(key=lambda s: (-s[0], s[2]))
    isbn, value, _, scheme = scored[0]
    return SearchResult(order, int(max_count), scheme, value, isbn,
                        [(s[0], s[2]) for s in scored[:keep]])
