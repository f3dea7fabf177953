"""GBS stability polynomials and one-step Runge-Kutta references.

The macro interval is normalized to ``H = 1`` so the stability variable is
``zeta = H * lambda``; component ``n`` takes ``n`` substeps of ``zeta / n``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

from .numkernel import RationalPolynomial, format_rational, parse_rational

__all__ = [
    "check_step_count",
    "gbs_stability_polynomial",
    "gbs_evaluate",
    "ButcherTableau",
    "tableau_stability_polynomial",
    "forward_euler",
    "classical_rk4",
    "RK4_ISB",
    "RK8_ISB",
    "RK8_STAGES",
]

#: Imaginary stability boundary of the 13-stage Prince-Dormand RK8 pair.
RK8_ISB = 3.7023
RK8_STAGES = 13
#: ``2*sqrt(2)``, the ISB shared by every 4-stage fourth order RK method.
RK4_ISB = 2.0 * np.sqrt(2.0)


def check_step_count(n: int) -> int:
    if isinstance(n, bool) or int(n) != n:
        raise ValueError(f"step count must be an integer, got {n!r}")
    n = int(n)
    if n < 2 or n % 2:
        raise ValueError(f"step count must be even and >= 2, got {n}")
    return n


@lru_cache(maxsize=None)
def gbs_stability_polynomial(n: int) -> RationalPolynomial:
    """Exact amplification polynomial of the basic GBS scheme with ``n`` substeps.

    Forward Euler start, ``n`` leap-frog steps and the three-point average,
    applied to ``y' = lambda*y`` over one unit interval. The result has
    degree ``n + 1``.
    """
    n = check_step_count(n)
    xi = RationalPolynomial([0, Fraction(1, n)])
    two_xi = xi * 2
    prev, cur = RationalPolynomial([1]), RationalPolynomial([1]) + xi
    history = [prev, cur]
    for _ in range(n):
        prev, cur = cur, prev + two_xi * cur
        history.append(cur)
    p_nm1, p_n, p_np1 = history[n - 1], history[n], history[n + 1]
    return (p_nm1 + p_n * 2 + p_np1) * Fraction(1, 4)


def gbs_evaluate(n: int, zeta):
    """Evaluate the GBS polynomial at complex ``zeta`` by running the recursion.

    The monomial expansion is never formed; the FE/LF/average recursion is
    the well-conditioned way to evaluate at large ``|zeta|``. ``zeta`` may be
    a scalar or an array. Overflow produces non-finite values, which are
    left in place for the caller to detect.
    """
    n = check_step_count(n)
    z = np.asarray(zeta, dtype=complex)
    xi = z / n
    with np.errstate(over="ignore", invalid="ignore"):
        prev = np.ones_like(z)
        cur = 1.0 + xi
        two_xi = 2.0 * xi
        for _ in range(n - 1):
            prev, cur = cur, prev + two_xi * cur
        # prev = P_{n-1}, cur = P_n
        nxt = prev + two_xi * cur
        out = 0.25 * (prev + 2.0 * cur + nxt)
    if np.ndim(zeta) == 0:
        return complex(out)
    return out


@dataclass(frozen=True)
class ButcherTableau:
    """Runge-Kutta tableau with exact rational entries."""

    A: tuple[tuple[Fraction, ...], ...]
    b: tuple[Fraction, ...]
    c: tuple[Fraction, ...]
    name: str = ""

    def __post_init__(self):
        s = len(self.b)
        if len(self.A) != s or any(len(row) != s for row in self.A):
            raise ValueError("stage matrix must be square with one row per weight")
        if len(self.c) != s:
            raise ValueError("abscissae length must equal stage count")
        for i, row in enumerate(self.A):
            if sum(row) != self.c[i]:
                warnings.warn(
                    f"tableau row {i}: sum(A[{i}]) = {sum(row)} differs from c[{i}] = {self.c[i]}",
                    stacklevel=3,
                )

    @classmethod
    def from_lists(cls, A, b, c=None, name: str = "") -> "ButcherTableau":
        A_ = tuple(tuple(parse_rational(x) if isinstance(x, str) else Fraction(x) for x in row) for row in A)
        b_ = tuple(parse_rational(x) if isinstance(x, str) else Fraction(x) for x in b)
        if c is None:
            c_ = tuple(sum(row, Fraction(0)) for row in A_)
        else:
            c_ = tuple(parse_rational(x) if isinstance(x, str) else Fraction(x) for x in c)
        return cls(A_, b_, c_, name)

    @property
    def stages(self) -> int:
        return len(self.b)

    @property
    def is_explicit(self) -> bool:
        return all(self.A[i][j] == 0 for i in range(self.stages) for j in range(i, self.stages))

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "A": [[format_rational(x) for x in row] for row in self.A],
            "b": [format_rational(x) for x in self.b],
            "c": [format_rational(x) for x in self.c],
        }

    @classmethod
    def from_json(cls, data: dict) -> "ButcherTableau":
        unknown = set(data) - {"name", "A", "b", "c"}
        if unknown:
            raise ValueError(f"unknown tableau fields: {sorted(unknown)}")
        return cls.from_lists(data["A"], data["b"], data.get("c"), data.get("name", ""))

    @classmethod
    def load(cls, path) -> "ButcherTableau":
        return cls.from_json(json.loads(Path(path).read_text()))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")


def tableau_stability_polynomial(t: ButcherTableau) -> RationalPolynomial:
    """``R(xi) = 1 + xi * b^T (I - xi*A)^{-1} 1`` for an explicit tableau.

    ``A`` is nilpotent, so the Neumann series terminates and
    ``R = 1 + sum_k b^T A^k 1 * xi**(k+1)``.
    """
    if not t.is_explicit:
        raise ValueError("only explicit tableaus are supported")
    s = t.stages
    vec = [Fraction(1)] * s
    coeffs = [Fraction(1)]
    for _ in range(s):
        coeffs.append(sum((bi * vi for bi, vi in zip(t.b, vec)), Fraction(0)))
        vec = [sum((t.A[i][j] * vec[j] for j in range(s)), Fraction(0)) for i in range(s)]
    return RationalPolynomial(coeffs)


def forward_euler() -> ButcherTableau:
    return ButcherTableau.from_lists([[0]], [1], [0], name="FE")


def classical_rk4() -> ButcherTableau:
    h = Fraction(1, 2)
    return ButcherTableau.from_lists(
        [[0, 0, 0, 0], [h, 0, 0, 0], [0, h, 0, 0], [0, 0, 1, 0]],
        [Fraction(1, 6), Fraction(1, 3), Fraction(1, 3), Fraction(1, 6)],
        [0, h, h, 1],
        name="RK4",
    )


def tableau_from_arrays(A: Sequence[Sequence[float]], b: Sequence[float]) -> ButcherTableau:
    """Convenience wrapper for float tableaus; entries are converted exactly."""
    return ButcherTableau.from_lists(
        [[Fraction(x) for x in row] for row in A], [Fraction(x) for x in b]
    )
