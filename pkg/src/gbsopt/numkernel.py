"""Exact rational arithmetic, dense polynomials and truncated power series.

Rationals are :class:`fractions.Fraction` throughout. The only extension is
:class:`GaussianRational`, a rational complex number, used where series
manipulations pick up factors of ``i`` that must stay exact.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence, Union

import numpy as np

__all__ = [
    "Rational",
    "parse_rational",
    "format_rational",
    "RationalPolynomial",
    "GaussianRational",
    "poly_add_scaled",
    "series_mul",
    "series_reciprocal",
    "series_log",
    "series_compose",
    "series_revert",
    "series_log_inverse",
    "solve_exact",
    "exp_coefficients",
]

Rational = Fraction
RationalLike = Union[int, Fraction, str]


def parse_rational(text: RationalLike) -> Fraction:
    """Parse ``"p/q"`` or ``"p"`` (or an int/Fraction) into a Fraction.

    Unicode minus signs are accepted since published tables use them.
    """
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int):
        return Fraction(text)
    if not isinstance(text, str):
        raise TypeError(f"cannot parse rational from {type(text).__name__}")
    cleaned = text.strip().replace("−", "-").replace(" ", "")
    if not cleaned:
        raise ValueError("empty rational string")
    if any(ch in cleaned for ch in ".eE"):
        raise ValueError(f"not an exact rational: {text!r}")
    return Fraction(cleaned)


def format_rational(q: Fraction) -> str:
    """Inverse of :func:`parse_rational`."""
    q = Fraction(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


class RationalPolynomial:
    """Dense polynomial with Fraction coefficients, lowest degree first.

    Trailing zeros are trimmed, so ``degree`` is the index of the last
    nonzero coefficient and the zero polynomial has no coefficients
    (degree -1).
    """

    __slots__ = ("_coeffs",)

    def __init__(self, coefficients: Iterable[RationalLike] = ()):
        coeffs = [parse_rational(c) if isinstance(c, str) else Fraction(c) for c in coefficients]
        while coeffs and coeffs[-1] == 0:
            coeffs.pop()
        self._coeffs = tuple(coeffs)

    @classmethod
    def monomial(cls, k: int, coefficient: RationalLike = 1) -> "RationalPolynomial":
        return cls([0] * k + [Fraction(coefficient)])

    @property
    def coefficients(self) -> tuple[Fraction, ...]:
        return self._coeffs

    @property
    def degree(self) -> int:
        return len(self._coeffs) - 1

    def coefficient(self, k: int) -> Fraction:
        if 0 <= k < len(self._coeffs):
            return self._coeffs[k]
        return Fraction(0)

    def __len__(self) -> int:
        return len(self._coeffs)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, RationalPolynomial):
            return self._coeffs == other._coeffs
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self._coeffs)

    def __repr__(self) -> str:
        body = ", ".join(format_rational(c) for c in self._coeffs)
        return f"RationalPolynomial([{body}])"

    def __add__(self, other: "RationalPolynomial") -> "RationalPolynomial":
        return poly_add_scaled(self, other, Fraction(1))

    def __sub__(self, other: "RationalPolynomial") -> "RationalPolynomial":
        return poly_add_scaled(self, other, Fraction(-1))

    def __neg__(self) -> "RationalPolynomial":
        return RationalPolynomial(-c for c in self._coeffs)

    def __mul__(self, other) -> "RationalPolynomial":
        if isinstance(other, RationalPolynomial):
            if not self._coeffs or not other._coeffs:
                return RationalPolynomial()
            out = [Fraction(0)] * (len(self._coeffs) + len(other._coeffs) - 1)
            for i, a in enumerate(self._coeffs):
                if a == 0:
                    continue
                for j, b in enumerate(other._coeffs):
                    out[i + j] += a * b
            return RationalPolynomial(out)
        s = Fraction(other)
        return RationalPolynomial(c * s for c in self._coeffs)

    __rmul__ = __mul__

    def rescale(self, factor: RationalLike) -> "RationalPolynomial":
        """Return ``p(factor * x)``."""
        f = Fraction(factor)
        out, power = [], Fraction(1)
        for c in self._coeffs:
            out.append(c * power)
            power *= f
        return RationalPolynomial(out)

    def __call__(self, x):
        """Horner evaluation. Exact for Fraction input, floating otherwise."""
        if isinstance(x, (int, Fraction)):
            acc = Fraction(0)
            for c in reversed(self._coeffs):
                acc = acc * x + c
            return acc
        return self.evaluate_float(x)

    def evaluate_float(self, x):
        """Double-precision Horner evaluation; ``x`` may be a complex array."""
        x = np.asarray(x)
        acc = np.zeros_like(x, dtype=np.result_type(x.dtype, np.float64))
        for c in reversed(self._coeffs):
            acc = acc * x + float(c)
        return acc

    def to_float_array(self) -> np.ndarray:
        return np.array([float(c) for c in self._coeffs], dtype=float)


def poly_add_scaled(p: RationalPolynomial, q: RationalPolynomial, s: RationalLike) -> RationalPolynomial:
    """Exact ``p + s*q``."""
    s = Fraction(s)
    a, b = p.coefficients, q.coefficients
    n = max(len(a), len(b))
    return RationalPolynomial(
        (a[k] if k < len(a) else 0) + s * (b[k] if k < len(b) else 0) for k in range(n)
    )


def exp_coefficients(order: int) -> list[Fraction]:
    """Taylor coefficients of ``exp`` through ``x**order``."""
    out, fact = [], 1
    for k in range(order + 1):
        if k:
            fact *= k
        out.append(Fraction(1, fact))
    return out


class GaussianRational:
    """Exact complex number ``re + i*im`` with Fraction parts."""

    __slots__ = ("re", "im")

    def __init__(self, re: RationalLike = 0, im: RationalLike = 0):
        self.re = Fraction(re)
        self.im = Fraction(im)

    @classmethod
    def coerce(cls, x) -> "GaussianRational":
        if isinstance(x, GaussianRational):
            return x
        return cls(x, 0)

    def __repr__(self) -> str:
        return f"GaussianRational({format_rational(self.re)}, {format_rational(self.im)})"

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            return self.im == 0 and self.re == other
        if isinstance(other, GaussianRational):
            return self.re == other.re and self.im == other.im
        return NotImplemented

    def __hash__(self) -> int:
        return hash((self.re, self.im))

    def __bool__(self) -> bool:
        return bool(self.re) or bool(self.im)

    def __add__(self, other) -> "GaussianRational":
        o = GaussianRational.coerce(other)
        return GaussianRational(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other) -> "GaussianRational":
        o = GaussianRational.coerce(other)
        return GaussianRational(self.re - o.re, self.im - o.im)

    def __rsub__(self, other) -> "GaussianRational":
        return GaussianRational.coerce(other) - self

    def __neg__(self) -> "GaussianRational":
        return GaussianRational(-self.re, -self.im)

    def __mul__(self, other) -> "GaussianRational":
        if isinstance(other, (int, Fraction)):
            return GaussianRational(self.re * other, self.im * other)
        o = GaussianRational.coerce(other)
        return GaussianRational(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def conjugate(self) -> "GaussianRational":
        return GaussianRational(self.re, -self.im)

    def __truediv__(self, other) -> "GaussianRational":
        if isinstance(other, (int, Fraction)):
            return GaussianRational(self.re / other, self.im / other)
        o = GaussianRational.coerce(other)
        den = o.re * o.re + o.im * o.im
        if den == 0:
            raise ZeroDivisionError("division by zero Gaussian rational")
        num = self * o.conjugate()
        return GaussianRational(num.re / den, num.im / den)

    def __rtruediv__(self, other) -> "GaussianRational":
        return GaussianRational.coerce(other) / self

    def __complex__(self) -> complex:
        return complex(float(self.re), float(self.im))


I = GaussianRational(0, 1)

# Truncated power series are plain lists of GaussianRational (or Fraction),
# index k holding the coefficient of x**k.


def _zero(n: int) -> list[GaussianRational]:
    return [GaussianRational() for _ in range(n)]


def _as_series(a: Sequence, n: int) -> list[GaussianRational]:
    out = [GaussianRational.coerce(c) for c in list(a)[:n]]
    return out + _zero(n - len(out))


def series_mul(a: Sequence, b: Sequence, n: int) -> list[GaussianRational]:
    """Product truncated to ``n`` coefficients."""
    a, b = _as_series(a, n), _as_series(b, n)
    out = _zero(n)
    for i, ai in enumerate(a):
        if not ai:
            continue
        for j in range(n - i):
            if b[j]:
                out[i + j] = out[i + j] + ai * b[j]
    return out


def series_reciprocal(a: Sequence, n: int) -> list[GaussianRational]:
    a = _as_series(a, n)
    if not a[0]:
        raise ZeroDivisionError("series with zero constant term has no reciprocal")
    out = _zero(n)
    out[0] = GaussianRational(1) / a[0]
    for k in range(1, n):
        acc = GaussianRational()
        for j in range(1, k + 1):
            if a[j]:
                acc = acc + a[j] * out[k - j]
        out[k] = -acc / a[0]
    return out


def series_log(a: Sequence, n: int) -> list[GaussianRational]:
    """``log a(x)`` for a series with ``a(0) == 1``, via ``(log a)' = a'/a``."""
    a = _as_series(a, n + 1)
    if a[0] != 1:
        raise ValueError("series_log requires constant term 1")
    deriv = [a[k] * k for k in range(1, n + 1)]
    quotient = series_mul(deriv, series_reciprocal(a, n), n)
    out = _zero(n)
    for k in range(1, n):
        out[k] = quotient[k - 1] / k
    return out


def series_compose(f: Sequence, g: Sequence, n: int) -> list[GaussianRational]:
    """``f(g(x))`` truncated to ``n`` coefficients; requires ``g(0) == 0``."""
    g = _as_series(g, n)
    if g[0]:
        raise ValueError("inner series must vanish at the origin")
    f = list(f)[:n]
    out = _zero(n)
    power = _as_series([1], n)
    for k, fk in enumerate(f):
        fk = GaussianRational.coerce(fk)
        if fk:
            out = [o + fk * p for o, p in zip(out, power)]
        power = series_mul(power, g, n)
    return out


def series_revert(f: Sequence, n: int) -> list[GaussianRational]:
    """Compositional inverse ``g`` with ``f(g(x)) = x`` through ``x**(n-1)``.

    ``f`` must have ``f(0) = 0`` and an invertible linear coefficient. The
    coefficient of ``x**k`` in ``f(g)`` depends on ``g_k`` only through
    ``f_1 * g_k``, so the reversion proceeds one coefficient at a time.
    """
    f = _as_series(f, n)
    if f[0]:
        raise ValueError("series to revert must vanish at the origin")
    if not f[1]:
        raise ValueError("series to revert needs a nonzero linear term")
    g = _zero(n)
    if n > 1:
        g[1] = GaussianRational(1) / f[1]
    for k in range(2, n):
        comp = series_compose(f, g[: k + 1], k + 1)
        g[k] = -comp[k] / f[1]
    return g


def series_log_inverse(p: RationalPolynomial, order: int) -> list[GaussianRational]:
    """Invert ``p(xi) = exp(i*theta)`` near the origin.

    Expands ``theta(xi) = -i log p(xi)`` and reverts it, returning the
    coefficients of ``xi(theta)`` through ``theta**order`` (index k holds the
    coefficient of ``theta**k``).
    """
    if order < 2:
        raise ValueError("order must be at least 2")
    if p.coefficient(0) != 1:
        raise ValueError("polynomial must satisfy p(0) = 1")
    n = order + 1
    log_p = series_log(list(p.coefficients), n)
    theta = [-(I * c) for c in log_p]
    return series_revert(theta, n)


def solve_exact(matrix: Sequence[Sequence[RationalLike]], rhs: Sequence[RationalLike]) -> list[Fraction]:
    """Solve a square linear system exactly by Gaussian elimination."""
    n = len(matrix)
    if any(len(row) != n for row in matrix) or len(rhs) != n:
        raise ValueError("solve_exact needs a square system")
    aug = [[Fraction(x) for x in row] + [Fraction(b)] for row, b in zip(matrix, rhs)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if pivot is None:
            raise np.linalg.LinAlgError("singular system")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        piv = aug[col][col]
        row = [x / piv for x in aug[col]]
        aug[col] = row
        for r in range(n):
            if r != col and aug[r][col] != 0:
                factor = aug[r][col]
                aug[r] = [x - factor * y for x, y in zip(aug[r], row)]
    return [aug[r][n] for r in range(n)]
