"""Extrapolated GBS time stepping with one worker per core of a partition plan.

Each macro step runs every component integrator independently; components
placed on the same core share the evaluation ``f(t, y)`` at the start of the
step. The weighted combination happens after all workers finish, always in
ascending step-count order and as ``y + sum c_i (y_i - y)``, so results are bit-identical however the work
was scheduled.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .extrapolation import ExtrapolationScheme, PartitionPlan, default_plan
from .gbs import check_step_count

__all__ = [
    "IntegrationProblem",
    "MacroStepResult",
    "IntegrationResult",
    "InstabilityError",
    "gbs_component_step",
    "macro_step",
    "integrate",
]

RHS = Callable[[float, np.ndarray], np.ndarray]


class InstabilityError(FloatingPointError):
    """A component produced a non-finite state."""


@dataclass(frozen=True)
class IntegrationProblem:
    """``y'(t) = rhs(t, y)`` on ``[t0, t_end]``.

    ``rhs`` must be deterministic and safe to call from several threads at
    once.
    """

    rhs: RHS
    t0: float
    y0: np.ndarray
    t_end: float


@dataclass
class MacroStepResult:
    y_end: np.ndarray
    components: dict[int, np.ndarray]
    evaluations: tuple[int, ...]


@dataclass
class IntegrationResult:
    y: np.ndarray
    t: float
    steps: int
    total_evaluations: int
    critical_path_evaluations: int

    def to_json(self) -> dict:
        return {
            "t": self.t,
            "steps": self.steps,
            "total_evaluations": self.total_evaluations,
            "critical_path_evaluations": self.critical_path_evaluations,
        }


class _CountingRHS:
    def __init__(self, rhs: RHS):
        self.rhs = rhs
        self.count = 0

    def __call__(self, t, y):
        self.count += 1
        return self.rhs(t, y)


def _finite(y) -> bool:
    arr = np.asarray(y)
    if arr.dtype == object:
        return True
    return bool(np.all(np.isfinite(arr)))


def gbs_component_step(rhs: RHS, t0: float, y0, H: float, n: int, f0=None):
    """One basic GBS step of length ``H`` with ``n`` substeps.

    Forward Euler, ``n`` leap-frog steps and the three-point average. Costs
    ``n + 1`` evaluations of ``rhs``, or ``n`` when ``f0 = rhs(t0, y0)`` is
    passed in.
    """
    n = check_step_count(n)
    if not H > 0:
        raise ValueError("H must be positive")
    h = H / n
    if f0 is None:
        f0 = rhs(t0, y0)
    y_prev, y_cur = y0, y0 + h * f0
    y_next = y_cur
    for k in range(1, n + 1):
        y_next = y_prev + 2 * h * rhs(t0 + k * h, y_cur)
        if not _finite(y_next):
            raise InstabilityError(f"non-finite state in component n={n} at substep {k}")
        if k < n:
            y_prev, y_cur = y_cur, y_next
    return (y_prev + 2 * y_cur + y_next) / 4


def _run_core(rhs: RHS, counts, t, y, H):
    counter = _CountingRHS(rhs)
    f0 = counter(t, y)
    out = {n: gbs_component_step(counter, t, y, H, n, f0=f0) for n in counts}
    return out, counter.count


def macro_step(
    scheme: ExtrapolationScheme,
    plan: PartitionPlan,
    problem: IntegrationProblem | RHS,
    t: float,
    y,
    H: float,
    executor: ThreadPoolExecutor | None = None,
    exact: bool = False,
    weights: Sequence | None = None,
) -> MacroStepResult:
    """Advance one macro step of length ``H`` from ``(t, y)``.

    One task per plan core is submitted to ``executor`` (a private pool
    sized to the plan is used when none is given); waiting on all of them is
    the end-of-step barrier. With ``exact=True`` the exact rational weights
    are applied, which is meaningful for object arrays of Fractions.
    ``weights`` overrides both, aligned with ``scheme.components``; use it
    for other number types (e.g. mpmath values, which would silently round
    Fractions to double).
    """
    if not plan.covers(scheme.step_counts):
        raise ValueError("partition plan does not match the scheme's step counts")
    rhs = problem.rhs if isinstance(problem, IntegrationProblem) else problem
    own = executor is None
    if own:
        executor = ThreadPoolExecutor(max_workers=max(1, plan.n_cores))
    try:
        futures = [executor.submit(_run_core, rhs, core, t, y, H) for core in plan.cores]
        results = [f.result() for f in futures]
    finally:
        if own:
            executor.shutdown()
    components: dict[int, np.ndarray] = {}
    for comp, _ in results:
        components.update(comp)
    # Weights sum to one, so combining increments is the same sum but keeps
    # the weights' rounding relative to y_i - y instead of y_i.
    if weights is None:
        weights = scheme.weights if exact else scheme.float_weights
    elif len(weights) != len(scheme.components):
        raise ValueError("weights must align with the scheme's components")
    acc = None
    for (n, _), c in zip(scheme.components, weights):
        term = c * (components[n] - y)
        acc = term if acc is None else acc + term
    return MacroStepResult(y + acc, components, tuple(count for _, count in results))


def integrate(
    scheme: ExtrapolationScheme,
    plan: PartitionPlan | None,
    problem: IntegrationProblem,
    n_macro_steps: int,
    max_workers: int | None = None,
    exact: bool = False,
    weights: Sequence | None = None,
) -> IntegrationResult:
    """Integrate ``problem`` with ``n_macro_steps`` equal macro steps."""
    if n_macro_steps < 1:
        raise ValueError("n_macro_steps must be >= 1")
    plan = plan or default_plan(scheme)
    H = (problem.t_end - problem.t0) / n_macro_steps
    workers = plan.n_cores if max_workers is None else max(1, min(max_workers, plan.n_cores))
    y = problem.y0
    total = 0
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for k in range(n_macro_steps):
            t = problem.t0 + k * H
            step = macro_step(scheme, plan, problem, t, y, H, executor=pool, exact=exact, weights=weights)
            y = step.y_end
            total += sum(step.evaluations)
    return IntegrationResult(
        y=y,
        t=problem.t_end,
        steps=n_macro_steps,
        total_evaluations=total,
        critical_path_evaluations=n_macro_steps * plan.critical_path,
    )
