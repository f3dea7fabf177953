"""Extrapolation weights, scheme catalog and core partitioning.

Weights solve the even-power order constraints ``V c = b`` where row ``k`` of
``V`` holds ``h_i**(2k)`` with ``h_i = 1/n_i``. Everything here is exact;
conversion to floating point happens only in the evaluators and integrator.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .gbs import check_step_count, gbs_stability_polynomial
from .numkernel import (
    RationalPolynomial,
    exp_coefficients,
    format_rational,
    parse_rational,
    poly_add_scaled,
    solve_exact,
)

__all__ = [
    "VandermondeSystem",
    "build_vandermonde",
    "solve_full_weights",
    "dependent_weights",
    "ExtrapolationScheme",
    "make_scheme",
    "catalog_scheme",
    "CATALOG_NAMES",
    "PartitionPlan",
    "partition_plan",
    "default_plan",
    "component_evaluations",
    "core_evaluations",
    "verify_order",
    "load_scheme",
    "save_scheme",
]


def _check_order(p: int) -> int:
    if int(p) != p or p <= 0 or p % 4:
        raise ValueError(f"order must be a positive multiple of 4, got {p}")
    return int(p)


def _check_counts(step_counts: Sequence[int]) -> tuple[int, ...]:
    counts = tuple(check_step_count(n) for n in step_counts)
    if len(set(counts)) != len(counts):
        raise ValueError(f"duplicate step counts in {counts}")
    return counts


@dataclass(frozen=True)
class VandermondeSystem:
    step_counts: tuple[int, ...]
    matrix: tuple[tuple[Fraction, ...], ...]
    rhs: tuple[Fraction, ...]

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.matrix), len(self.step_counts)

    def columns(self, counts: Sequence[int]) -> list[list[Fraction]]:
        """Submatrix made from the columns of the given step counts, in that order."""
        idx = [self.step_counts.index(n) for n in counts]
        return [[row[j] for j in idx] for row in self.matrix]

    def residual(self, weights: Sequence[Fraction]) -> list[Fraction]:
        return [
            sum((v * c for v, c in zip(row, weights)), Fraction(0)) - b
            for row, b in zip(self.matrix, self.rhs)
        ]


def build_vandermonde(step_counts: Sequence[int], p: int) -> VandermondeSystem:
    p = _check_order(p)
    counts = _check_counts(step_counts)
    rows = p // 2
    if len(counts) < rows:
        raise ValueError(f"order {p} needs at least {rows} step counts, got {len(counts)}")
    matrix = tuple(tuple(Fraction(1, n ** (2 * k)) for n in counts) for k in range(rows))
    rhs = (Fraction(1),) + (Fraction(0),) * (rows - 1)
    return VandermondeSystem(counts, matrix, rhs)


def solve_full_weights(step_counts: Sequence[int], p: int) -> list[Fraction]:
    """Classical Richardson weights for exactly ``p/2`` step counts."""
    system = build_vandermonde(step_counts, p)
    if len(system.step_counts) != p // 2:
        raise ValueError(f"square solve needs exactly {p // 2} step counts")
    return solve_exact(system.matrix, system.rhs)


def dependent_weights(
    n_dep: Sequence[int], n_free: Sequence[int], c_free: Sequence, p: int
) -> list[Fraction]:
    """Solve ``V_dep c_dep = b - V_free c_free`` exactly."""
    p = _check_order(p)
    if len(n_dep) != p // 2:
        raise ValueError(f"need exactly {p // 2} dependent step counts, got {len(n_dep)}")
    if len(n_free) != len(c_free):
        raise ValueError("free weights must align with free step counts")
    system = build_vandermonde(list(n_dep) + list(n_free), p)
    c_free = [Fraction(c) if not isinstance(c, str) else parse_rational(c) for c in c_free]
    v_dep = system.columns(n_dep)
    v_free = system.columns(n_free)
    rhs = [
        b - sum((v * c for v, c in zip(row, c_free)), Fraction(0))
        for b, row in zip(system.rhs, v_free)
    ]
    return solve_exact(v_dep, rhs)


def dependent_map(n_dep: Sequence[int], n_free: Sequence[int], p: int):
    """Affine map ``c_dep = base + M @ c_free`` as exact ``(base, M)``.

    ``M`` is ``-V_dep^{-1} V_free`` with one column per free count.
    """
    base = dependent_weights(n_dep, n_free, [0] * len(n_free), p)
    system = build_vandermonde(list(n_dep) + list(n_free), p)
    v_dep = system.columns(n_dep)
    cols = []
    for j, n in enumerate(n_free):
        col = [row[0] for row in system.columns([n])]
        cols.append([-x for x in solve_exact(v_dep, col)])
    M = [[cols[j][i] for j in range(len(n_free))] for i in range(len(n_dep))]
    return base, M


@dataclass(frozen=True)
class ExtrapolationScheme:
    """Order-``p`` extrapolated GBS method.

    ``c_dep`` is always the exact solution of the order constraints given
    ``c_free``; constructing an inconsistent scheme raises.
    """

    name: str
    order: int
    n_dep: tuple[int, ...]
    c_dep: tuple[Fraction, ...]
    n_free: tuple[int, ...] = ()
    c_free: tuple[Fraction, ...] = ()

    def __post_init__(self):
        _check_order(self.order)
        _check_counts(self.n_dep + self.n_free)
        if len(self.n_dep) != self.order // 2:
            raise ValueError(f"{self.name}: |n_dep| must be {self.order // 2}")
        if len(self.c_dep) != len(self.n_dep) or len(self.c_free) != len(self.n_free):
            raise ValueError(f"{self.name}: weights do not align with step counts")
        res = self.vandermonde.residual(self.c_dep + self.c_free)
        if any(res):
            raise ValueError(f"{self.name}: order constraints violated, residual {res}")

    @cached_property
    def vandermonde(self) -> VandermondeSystem:
        return build_vandermonde(self.n_dep + self.n_free, self.order)

    @property
    def step_counts(self) -> tuple[int, ...]:
        """All step counts in ascending order."""
        return tuple(n for n, _ in self.components)

    @property
    def components(self) -> tuple[tuple[int, Fraction], ...]:
        """``(n, c)`` pairs sorted by step count; the fixed combination order."""
        pairs = list(zip(self.n_dep, self.c_dep)) + list(zip(self.n_free, self.c_free))
        return tuple(sorted(pairs))

    @property
    def weights(self) -> tuple[Fraction, ...]:
        return tuple(c for _, c in self.components)

    @property
    def float_weights(self) -> np.ndarray:
        return np.array([float(c) for c in self.weights])

    @property
    def n_max(self) -> int:
        return max(self.step_counts)

    @cached_property
    def polynomial(self) -> RationalPolynomial:
        """Exact combined stability polynomial ``sum c_i P_{n_i}``."""
        out = RationalPolynomial()
        for n, c in self.components:
            out = poly_add_scaled(out, gbs_stability_polynomial(n), c)
        return out

    def with_free_weights(self, c_free: Sequence, name: str | None = None) -> "ExtrapolationScheme":
        return make_scheme(
            self.order, self.n_dep + self.n_free, c_free=c_free, n_dep=self.n_dep, name=name or self.name
        )

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "order": self.order,
            "n_dep": list(self.n_dep),
            "c_dep": [format_rational(c) for c in self.c_dep],
            "n_free": list(self.n_free),
            "c_free": [format_rational(c) for c in self.c_free],
        }

    @classmethod
    def from_json(cls, data: dict) -> "ExtrapolationScheme":
        required = {"name", "order", "n_dep", "n_free", "c_free"}
        allowed = required | {"c_dep"}
        if set(data) - allowed:
            raise ValueError(f"unknown scheme fields: {sorted(set(data) - allowed)}")
        if required - set(data):
            raise ValueError(f"missing scheme fields: {sorted(required - set(data))}")
        c_free = [parse_rational(c) for c in data["c_free"]]
        scheme = make_scheme(
            data["order"], list(data["n_dep"]) + list(data["n_free"]), c_free=c_free,
            n_dep=data["n_dep"], name=data["name"],
        )
        if "c_dep" in data:
            stored = tuple(parse_rational(c) for c in data["c_dep"])
            if stored != scheme.c_dep:
                raise ValueError(f"{scheme.name}: stored c_dep disagrees with the order constraints")
        return scheme


def make_scheme(
    order: int,
    step_counts: Sequence[int],
    c_free: Sequence | None = None,
    n_dep: Sequence[int] | None = None,
    name: str = "",
) -> ExtrapolationScheme:
    """Build a scheme, solving the dependent weights exactly.

    By default the ``order/2`` largest step counts are dependent. Free
    weights default to zero, which gives the classical square scheme on the
    dependent counts.
    """
    order = _check_order(order)
    counts = _check_counts(step_counts)
    if n_dep is None:
        n_dep = sorted(counts)[-(order // 2):]
    n_dep = tuple(int(n) for n in n_dep)
    if not set(n_dep) <= set(counts):
        raise ValueError("dependent counts must be a subset of the step counts")
    n_free = tuple(n for n in counts if n not in n_dep)
    if c_free is None:
        c_free = [Fraction(0)] * len(n_free)
    c_free = tuple(parse_rational(c) if isinstance(c, str) else Fraction(c) for c in c_free)
    c_dep = tuple(dependent_weights(n_dep, n_free, c_free, order))
    return ExtrapolationScheme(name or f"GBS{order}{list(counts)}", order, n_dep, c_dep, n_free, c_free)


# Published schemes. The fully-determined FD schemes are defined by their
# step counts alone; the others store the free weights verbatim.
_CATALOG = {
    "FD8": dict(order=8, n_dep=[2, 16, 18, 20], n_free=[], c_free=[]),
    "FD12": dict(order=12, n_dep=[2, 8, 12, 14, 16, 20], n_free=[], c_free=[]),
    "FD16": dict(order=16, n_dep=[2, 8, 10, 12, 14, 16, 18, 22], n_free=[], c_free=[]),
    "GBS_8_6": dict(
        order=8,
        n_dep=[2, 4, 6, 10],
        n_free=[8, 12, 14, 16, 18, 20, 22],
        c_free=["2165/767488", "13805/611712", "4553/72080", "14503/66520",
                "27058/7627", "-86504/5761", "40916/3367"],
    ),
    "GBS_8_8": dict(
        order=8,
        n_dep=[2, 26, 28, 30],
        n_free=[4, 6, 8, 10, 12, 14, 16, 18, 20, 22, 24],
        c_free=["6833/476577792", "10847/91078656", "15235/34643968", "383/321152",
                "543/198784", "9947/1741056", "6243/543104", "6875/296192",
                "1401/28496", "17713/152688", "6375/19264"],
    ),
    "GBS_12_8": dict(
        order=12,
        n_dep=[2, 8, 10, 16, 24, 26],
        n_free=[4, 6, 12, 14, 18, 20, 22, 28, 30],
        c_free=["235/21030240256", "4147/1612709888", "11521/39731200", "2375/3528704",
                "6435/708736", "1291/15780", "11311/4672", "-180864/751", "222080/2079"],
    ),
}

CATALOG_NAMES = tuple(_CATALOG)

#: Number of cores each published scheme is designed for.
CATALOG_CORES = {"FD8": 3, "FD12": 4, "FD16": 5, "GBS_8_6": 6, "GBS_8_8": 8, "GBS_12_8": 8}


def catalog_scheme(name: str) -> ExtrapolationScheme:
    try:
        entry = _CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown scheme {name!r}; known: {', '.join(CATALOG_NAMES)}") from None
    return make_scheme(
        entry["order"], entry["n_dep"] + entry["n_free"], c_free=entry["c_free"],
        n_dep=entry["n_dep"], name=name,
    )


def catalog_file(name: str) -> Path:
    """Path of the shipped JSON file for a catalog scheme."""
    return Path(str(resources.files("gbsopt") / "catalog" / f"{name}.json"))


def load_scheme(path) -> ExtrapolationScheme:
    return ExtrapolationScheme.from_json(json.loads(Path(path).read_text()))


def save_scheme(scheme: ExtrapolationScheme, path) -> None:
    Path(path).write_text(json.dumps(scheme.to_json(), indent=2) + "\n")


def component_evaluations(n: int) -> int:
    """Right-hand side evaluations of one GBS component: FE plus ``n`` leap-frogs."""
    return n + 1


def core_evaluations(counts: Sequence[int]) -> int:
    """Evaluations for components stacked on one core sharing ``f(t0, y0)``."""
    if not counts:
        return 0
    return sum(component_evaluations(n) for n in counts) - (len(counts) - 1)


@dataclass(frozen=True)
class PartitionPlan:
    cores: tuple[tuple[int, ...], ...]
    evaluations: tuple[int, ...] = field(init=False)
    critical_path: int = field(init=False)

    def __post_init__(self):
        evals = tuple(core_evaluations(c) for c in self.cores)
        object.__setattr__(self, "evaluations", evals)
        object.__setattr__(self, "critical_path", max(evals) if evals else 0)

    @property
    def n_cores(self) -> int:
        return len(self.cores)

    @property
    def step_counts(self) -> tuple[int, ...]:
        return tuple(sorted(n for core in self.cores for n in core))

    def covers(self, step_counts: Sequence[int]) -> bool:
        return self.step_counts == tuple(sorted(step_counts))

    def to_json(self) -> dict:
        return {
            "cores": [list(c) for c in self.cores],
            "evaluations": list(self.evaluations),
            "critical_path": self.critical_path,
        }


def partition_plan(step_counts: Sequence[int], n_cores: int) -> PartitionPlan:
    """Assign components to cores.

    Counts ``n`` and ``N_max - n`` are folded onto one core; those pairs and
    the leftovers are then placed largest-load first onto the currently
    least-loaded core, accounting for the shared first evaluation. Cores
    left empty are dropped from the plan.
    """
    if n_cores < 1:
        raise ValueError("n_cores must be >= 1")
    counts = sorted(_check_counts(step_counts), reverse=True)
    n_max = counts[0]
    remaining = set(counts)
    units: list[tuple[int, ...]] = []
    for n in counts:
        if n not in remaining:
            continue
        remaining.discard(n)
        partner = n_max - n
        if partner in remaining:
            remaining.discard(partner)
            units.append((n, partner))
        else:
            units.append((n,))
    units.sort(key=lambda u: (-core_evaluations(u), -max(u)))
    bins: list[list[int]] = [[] for _ in range(n_cores)]
    for unit in units:
        def load_after(b):
            return core_evaluations(b + list(unit))
        target = min(range(n_cores), key=lambda k: (load_after(bins[k]), k))
        bins[target].extend(unit)
    cores = tuple(tuple(sorted(b, reverse=True)) for b in bins if b)
    return PartitionPlan(cores)


def default_plan(scheme: ExtrapolationScheme) -> PartitionPlan:
    """Plan on as many cores as needed to reach the minimal critical path ``N_max + 1``."""
    counts = scheme.step_counts
    for k in range(1, len(counts) + 1):
        plan = partition_plan(counts, k)
        if plan.critical_path == scheme.n_max + 1:
            return plan
    return partition_plan(counts, len(counts))


def verify_order(scheme: ExtrapolationScheme | RationalPolynomial) -> int:
    """Largest ``q`` with the combined polynomial matching ``exp`` through ``zeta**q``."""
    poly = scheme if isinstance(scheme, RationalPolynomial) else scheme.polynomial
    target = exp_coefficients(poly.degree + 1)
    q = -1
    for k, t in enumerate(target):
        if poly.coefficient(k) != t:
            break
        q = k
    return q
