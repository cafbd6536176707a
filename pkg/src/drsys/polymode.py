"""Masses P(X_n = k) as exact polynomials in the mixing parameter p.

Internally a :class:`PolyDist` keeps every mass in the homogeneous basis
``p**j * (1-p)**(d-j)`` with d = m**n.  Both X_0 masses, ``1-p`` and
``w_k * p``, have nonnegative coefficients in that basis and the
recursion only adds and multiplies, so every coefficient stays a
nonnegative integer over one shared denominator.  That lets the
bivariate (value, power) convolution run through the same packed
big-integer kernel as the numeric engine.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from numbers import Rational
from typing import Any, Iterable, Mapping, Sequence

from ._kernels import int_convolve_power
from .engine import Dist
from .model import StarLaw, format_number, parse_number


class BudgetExceeded(RuntimeError):
    """A symbolic computation would exceed its configured size budget."""


# default generation budgets per branching factor
DEFAULT_MAX_GENERATION = {2: 8, 3: 5}


class RationalPoly:
    """Univariate polynomial with :class:`Fraction` coefficients.

    ``coeffs[i]`` multiplies ``x**i``; trailing zeros are trimmed so the
    zero polynomial has no coefficients at all.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable[Any] = ()):
        c = [Fraction(x) for x in coeffs]
        while c and c[-1] == 0:
            c.pop()
        self.coeffs = tuple(c)

    @classmethod
    def x(cls) -> RationalPoly:
        return cls((0, 1))

    @classmethod
    def const(cls, c: Any) -> RationalPoly:
        return cls((c,))

    @property
    def degree(self) -> int:
        """Degree, with -1 for the zero polynomial."""
        return len(self.coeffs) - 1

    def __call__(self, x):
        acc = x * 0
        for c in reversed(self.coeffs):
            acc = acc * x + (c if isinstance(x, Rational) else _lift(c, x))
        return acc

    def derivative(self, k: int = 1) -> RationalPoly:
        if k < 0:
            raise ValueError("k must be >= 0")
        c = self.coeffs
        return RationalPoly(
            c[i] * math.perm(i, k) for i in range(k, len(c))
        )

    @staticmethod
    def _coerce(other) -> RationalPoly:
        if isinstance(other, RationalPoly):
            return other
        if isinstance(other, Rational):
            return RationalPoly((other,))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        a, b = self.coeffs, other.coeffs
        n = max(len(a), len(b))
        return RationalPoly(
            (a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(n)
        )

    __radd__ = __add__

    def __neg__(self):
        return RationalPoly(-c for c in self.coeffs)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        a, b = self.coeffs, other.coeffs
        if not a or not b:
            return RationalPoly()
        out = [Fraction(0)] * (len(a) + len(b) - 1)
        for i, x in enumerate(a):
            if x:
                for j, y in enumerate(b):
                    out[i + j] += x * y
        return RationalPoly(out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Rational):
            return RationalPoly(c / other for c in self.coeffs)
        return NotImplemented

    def __pow__(self, e: int):
        if e < 0:
            raise ValueError("negative power")
        out, base = RationalPoly((1,)), self
        while e:
            if e & 1:
                out = out * base
            e >>= 1
            if e:
                base = base * base
        return out

    def __eq__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def __repr__(self):
        if not self.coeffs:
            return "RationalPoly(0)"
        terms = [f"{c}*x^{i}" for i, c in enumerate(self.coeffs) if c]
        return "RationalPoly(" + " + ".join(terms) + ")"

    def to_json(self) -> dict:
        return {"coeffs": [format_number(c) for c in self.coeffs]}

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> RationalPoly:
        return cls(Fraction(parse_number(c)) for c in obj["coeffs"])


def _lift(c: Fraction, like):
    # bring an exact coefficient into the number type of ``like`` (float, mpf, ...)
    try:
        return type(like)(c.numerator) / type(like)(c.denominator)
    except TypeError:
        return c.numerator / c.denominator


def bernstein_to_power(coeffs: Sequence[int], den: int, degree: int) -> RationalPoly:
    """Convert sum_j coeffs[j] p^j (1-p)^(degree-j) / den to the power basis."""
    out = [0] * (degree + 1)
    for j, c in enumerate(coeffs):
        if not c:
            continue
        r = degree - j
        # p^j (1-p)^r = sum_i (-1)^i C(r, i) p^(j+i)
        for i in range(r + 1):
            term = c * math.comb(r, i)
            out[j + i] += -term if i & 1 else term
    return RationalPoly(Fraction(v, den) for v in out)


@dataclass(frozen=True)
class PolyDist:
    """Law of X_n with masses that are exact polynomials in p.

    ``rows[k][j]`` is the integer coefficient of ``p**j (1-p)**(degree-j)``
    in ``den * P(X_n = k)``.
    """

    m: int
    generation: int
    degree: int
    rows: tuple[tuple[int, ...], ...]
    den: int
    source: Any = field(default=None, compare=False)

    @property
    def support_max(self) -> int:
        return len(self.rows) - 1

    def mass(self, k: int) -> RationalPoly:
        """P(X_n = k) as a polynomial in p (power basis)."""
        if k < 0 or k >= len(self.rows):
            return RationalPoly()
        return self._mass_cache(k)

    def _mass_cache(self, k: int) -> RationalPoly:
        cache = self.__dict__.setdefault("_masses", {})
        if k not in cache:
            cache[k] = bernstein_to_power(self.rows[k], self.den, self.degree)
        return cache[k]

    @cached_property
    def masses(self) -> dict[int, RationalPoly]:
        return {k: self.mass(k) for k in range(len(self.rows)) if any(self.rows[k])}

    def mass_sum_is_one(self) -> bool:
        """Exact check that sum_k P(X_n = k) is the constant polynomial 1.

        In the homogeneous basis this means the column sums are
        ``den * C(degree, j)``, the expansion of (p + (1-p))**degree.
        """
        for j in range(self.degree + 1):
            col = sum(row[j] for row in self.rows)
            if col != self.den * math.comb(self.degree, j):
                return False
        return True

    def evaluate(self, p: Any) -> Dist:
        """Exact law of X_n at a rational p."""
        p = Fraction(parse_number(p))
        if not 0 <= p <= 1:
            raise ValueError("p must lie in [0, 1]")
        a, b = p.numerator, p.denominator
        # den * b^d * mass = sum_j row[j] a^j (b-a)^(d-j)
        d = self.degree
        pw_a = [a**j for j in range(d + 1)]
        pw_q = [(b - a) ** j for j in range(d + 1)]
        num = [
            sum(c * pw_a[j] * pw_q[d - j] for j, c in enumerate(row) if c)
            for row in self.rows
        ]
        return Dist._exact(num, self.den * b**d)

    def mean(self) -> RationalPoly:
        """E(X_n) as a polynomial in p."""
        acc = RationalPoly()
        for k in range(1, len(self.rows)):
            if any(self.rows[k]):
                acc = acc + k * self.mass(k)
        return acc


def _homogeneous_rows(p0: Mapping[int, Fraction], p1: Mapping[int, Fraction]):
    """Rows for the law (1-p) * p0 + p * p1 at degree 1."""
    den = math.lcm(*(Fraction(v).denominator for v in (*p0.values(), *p1.values())))
    size = max([*p0, *p1]) + 1
    rows = []
    for k in range(size):
        q = Fraction(p0.get(k, 0)) * den
        r = Fraction(p1.get(k, 0)) * den
        rows.append((int(q), int(r)))
    return tuple(rows), den


def poly_initial(m: int, star: StarLaw) -> PolyDist:
    """P(X_0 = 0) = 1 - p and P(X_0 = k) = P(X_0^* = k) p."""
    if not star.exact:
        raise ValueError("symbolic mode needs a star law with exact rational masses")
    rows, den = _homogeneous_rows({0: Fraction(1)}, star.pmf())
    return PolyDist(m, 0, 1, rows, den, source=star)


def poly_mixture(m: int, mu: Mapping[int, Any], lam: Mapping[int, Any]) -> PolyDist:
    """Initial law (1-p) mu + p lambda for two finite laws on {0, 1, ...}."""
    mu = {int(k): Fraction(parse_number(v)) for k, v in mu.items()}
    lam = {int(k): Fraction(parse_number(v)) for k, v in lam.items()}
    for law in (mu, lam):
        if sum(law.values()) != 1 or any(v < 0 for v in law.values()):
            raise ValueError("mixture components must be probability laws")
    rows, den = _homogeneous_rows(mu, lam)
    return PolyDist(m, 0, 1, rows, den, source=(mu, lam))


def poly_cost(pd: PolyDist, steps: int = 1) -> dict:
    """Rough size of the state after ``steps`` more generations."""
    m = pd.m
    degree = pd.degree * m**steps
    support = pd.support_max * m**steps + 1
    coeff_bits = degree * (1 + pd.den.bit_length()) + degree.bit_length()
    return {
        "generation": pd.generation + steps,
        "degree": degree,
        "support": support,
        "coeff_bits": coeff_bits,
        "packed_megabytes": support * (degree + 1) * coeff_bits / 8e6,
    }


def poly_step(pd: PolyDist, max_generation: int | None = None) -> PolyDist:
    """Symbolic analogue of :func:`drsys.engine.dr_step`."""
    m = pd.m
    limit = DEFAULT_MAX_GENERATION.get(m, 3) if max_generation is None else max_generation
    if pd.generation + 1 > limit:
        est = poly_cost(pd)
        raise BudgetExceeded(
            f"generation {pd.generation + 1} exceeds the budget {limit} for m={m} "
            f"(degree {est['degree']}, ~{est['packed_megabytes']:.1f} MB packed); "
            "pass max_generation to override"
        )
    d = pd.degree
    width = m * d + 1
    # flatten (k, j) -> k * width + j; result j-degree m*d fits in the stride
    flat = []
    for row in pd.rows:
        flat.extend(row)
        flat.extend([0] * (width - len(row)))
    flat = flat[: (len(pd.rows) - 1) * width + d + 1]
    prod = int_convolve_power(flat, m)
    nd = m * d
    n_rows = (len(pd.rows) - 1) * m + 1
    conv = [tuple(prod[k * width: k * width + nd + 1]) for k in range(n_rows)]
    if len(conv) == 1:
        rows = conv
    else:
        head = tuple(a + b for a, b in zip(conv[0], conv[1]))
        rows = [head] + conv[2:]
    while len(rows) > 1 and not any(rows[-1]):
        rows.pop()
    return PolyDist(m, pd.generation + 1, nd, tuple(rows), pd.den**m, source=pd.source)


def poly_iterate(pd: PolyDist, n: int, max_generation: int | None = None) -> list[PolyDist]:
    out = [pd]
    for _ in range(n):
        out.append(poly_step(out[-1], max_generation))
    return out


def dkdp_p0(pd: PolyDist, k: int, p0: Any) -> Fraction:
    """Exact k-th derivative of P(X_n = 0) at p0."""
    if k < 0:
        raise ValueError("k must be >= 0")
    p0 = Fraction(parse_number(p0))
    if not 0 <= p0 <= 1:
        raise ValueError("p0 must lie in [0, 1]")
    return pd.mass(0).derivative(k)(p0)


def power_derivative(derivs: Sequence[Fraction], m: int, k: int) -> Fraction:
    """d^k/dp^k f^m from f, f', ..., f^(k) via the multinomial Leibniz rule."""
    total = Fraction(0)
    for parts in _compositions(k, m):
        coef = math.factorial(k)
        prod = Fraction(1)
        for kk in parts:
            coef //= math.factorial(kk)
            prod *= derivs[kk]
        total += coef * prod
    return total


def _compositions(k: int, m: int):
    # ordered m-tuples of nonnegative integers summing to k
    for cuts in itertools.combinations(range(k + m - 1), m - 1):
        prev = -1
        parts = []
        for c in cuts:
            parts.append(c - prev - 1)
            prev = c
        parts.append(k + m - 1 - prev - 1)
        yield parts


def zero_mass_power_derivative(pd: PolyDist, k: int, p0: Any) -> Fraction:
    """d^k/dp^k P(X_n = 0)^m at p0."""
    p0 = Fraction(parse_number(p0))
    f = pd.mass(0)
    derivs = [f.derivative(j)(p0) for j in range(k + 1)]
    return power_derivative(derivs, pd.m, k)


def derivative_table(
    m: int, star: StarLaw, N: int, k_max: int, p0: Any, max_generation: int | None = None
) -> list[dict]:
    """Rows (n, k, p0, d^k P(X_n=0), d^k P(X_n=0)^m / m^(n+1)) for n <= N, k <= k_max."""
    p0 = Fraction(parse_number(p0))
    pds = poly_iterate(poly_initial(m, star), N, max_generation)
    rows = []
    for pd in pds:
        f = pd.mass(0)
        derivs = [f.derivative(j)(p0) for j in range(k_max + 1)]
        for k in range(k_max + 1):
            rows.append({
                "n": pd.generation,
                "k": k,
                "p0": p0,
                "dk_zero_mass": derivs[k],
                "series_term": power_derivative(derivs, m, k) / Fraction(m) ** (pd.generation + 1),
            })
    return rows


def free_energy_partial_derivative(
    m: int, star: StarLaw, N: int, k: int, p0: Any, max_generation: int | None = None
) -> Fraction:
    """d^k/dp^k of E(X_0) - 1/(m-1) + sum_{n<=N} P(X_n=0)^m / m^(n+1) at p0."""
    p0 = Fraction(parse_number(p0))
    pd0 = poly_initial(m, star)
    head = pd0.mean()
    if k == 0:
        head = head - Fraction(1, m - 1)
    total = head.derivative(k)(p0)
    for pd in poly_iterate(pd0, N, max_generation):
        total += zero_mass_power_derivative(pd, k, p0) / Fraction(m) ** (pd.generation + 1)
    return total
