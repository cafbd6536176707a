"""Truncated generating functions and the Delta functional near criticality.

For a law X on {0, 1, ...} and a cap M - i, X^(M) = min(X, M - i) has the
polynomial generating function H(s) = E(s^X^(M)).  The functional

    Delta(s) = H - s(s-1)H' - ((m-1)(m-s)/m)(2sH' + s^2 H'')

is also E(f_s(X^(M))) for the explicit weight ``f_s`` below, and it
contracts by at most m^(-2 delta) H^(m-1) per generation once the law is
close enough to critical.  Everything here is exact for rational laws and
rational s; irrational s (the natural choice s = m^(1-delta)) is handled by
checking identities as polynomials in s and evaluating inequalities with
50-digit mpmath.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from numbers import Rational
from typing import Any, Sequence

import mpmath

from .engine import Dist, convolve_power, iterate, lower_window
from .model import ModelSpec, StarLaw, mix_initial
from .polymode import RationalPoly

MP_DPS = 50
DEFAULT_DELTA = Fraction(1, 64)


class DegenerateLaw(ValueError):
    """The root equation for s_i has no sign change."""


class Status(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    NOT_APPLICABLE = "not_applicable"


@dataclass(frozen=True)
class TruncatedLaw:
    """Law of min(X_i, M - i), stored as its masses on 0..M-i."""

    masses: tuple
    i: int
    M: int

    def __post_init__(self):
        if len(self.masses) > self.M - self.i + 1:
            raise ValueError("support exceeds the cap M - i")

    @property
    def cap(self) -> int:
        return self.M - self.i

    @property
    def exact(self) -> bool:
        return all(isinstance(v, Rational) for v in self.masses)

    def __getitem__(self, k: int):
        return self.masses[k] if 0 <= k < len(self.masses) else self.masses[0] * 0

    def to_dist(self) -> Dist:
        return Dist.from_masses(list(self.masses))

    @classmethod
    def from_masses(cls, masses: Sequence | dict, i: int = 0, M: int | None = None):
        if isinstance(masses, dict):
            size = max(masses) + 1
            masses = [masses.get(k, 0) for k in range(size)]
        masses = [Fraction(v) if isinstance(v, (int, Rational)) else v for v in masses]
        if M is None:
            M = i + max(len(masses) - 1, 1)
        return truncate(Dist.from_masses(masses), i, M)


def truncate(d: Dist, i: int, M: int) -> TruncatedLaw:
    """Cap X at M - i, moving the upper tail (and any lumped tail) onto the cap."""
    if not 0 <= i < M:
        raise ValueError(f"need 0 <= i < M, got i={i}, M={M}")
    cap = M - i
    ms = list(d.masses)
    zero = ms[0] * 0
    head = ms[:cap] + [zero] * max(0, cap - len(ms))
    top = sum(ms[cap:], zero) + d.lumped_tail
    out = head + [top]
    while len(out) > 1 and out[-1] == 0:
        out.pop()
    return TruncatedLaw(tuple(out), i, M)


def _mp(x):
    if isinstance(x, Rational):
        return mpmath.mpf(x.numerator) / x.denominator
    return mpmath.mpf(x)


def _coerce(t: TruncatedLaw, s):
    """Masses converted to match the arithmetic of ``s``."""
    if isinstance(s, Rational) and t.exact:
        return [Fraction(v) for v in t.masses], Fraction(s)
    if isinstance(s, mpmath.mpf):
        return [_mp(v) for v in t.masses], s
    return [float(v) for v in t.masses], float(s)


def H_and_derivs(t: TruncatedLaw, s) -> tuple:
    """(H(s), H'(s), H''(s)) as exact finite sums."""
    if s <= 0:
        raise ValueError("s must be positive")
    ps, s = _coerce(t, s)
    zero = s * 0
    h = h1 = h2 = zero
    for k, p in enumerate(ps):
        if not p:
            continue
        h += p * s**k
        if k >= 1:
            h1 += k * p * s ** (k - 1)
        if k >= 2:
            h2 += k * (k - 1) * p * s ** (k - 2)
    return h, h1, h2


def _delta_from(h, h1, h2, s, m):
    return h - s * (s - 1) * h1 - (m - 1) * (m - s) / m * (2 * s * h1 + s * s * h2)


def delta(t: TruncatedLaw, s, m: int):
    """Delta(s) from its definition through H, H' and H''."""
    h, h1, h2 = H_and_derivs(t, s)
    s = _coerce(t, s)[1]
    if isinstance(s, Fraction):
        m = Fraction(m)
    return _delta_from(h, h1, h2, s, m)


def f_s(k: int, s, m: int):
    """[1 - (s-1)k - ((m-1)(m-s)/m) k(k+1)] s^k."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if isinstance(s, Rational):
        s, m = Fraction(s), Fraction(m)
    return (1 - (s - 1) * k - (m - 1) * (m - s) / m * k * (k + 1)) * s**k


def delta_via_fs(t: TruncatedLaw, s, m: int):
    """Delta(s) as E(f_s(X)); the second route to the same number."""
    ps, s = _coerce(t, s)
    return sum((p * f_s(k, s, m) for k, p in enumerate(ps) if p), s * 0)


# --- symbolic forms in s ---------------------------------------------------

def _s_poly(t: TruncatedLaw) -> RationalPoly:
    if not t.exact:
        raise ValueError("symbolic forms need an exact law")
    return RationalPoly(t.masses)


def _f_poly(k: int, m: int) -> RationalPoly:
    s = RationalPoly.x()
    c = Fraction(m - 1, m)
    return (1 - (s - 1) * k - (m - s) * (c * k * (k + 1))) * s**k


def delta_poly(t: TruncatedLaw, m: int) -> RationalPoly:
    s = RationalPoly.x()
    H = _s_poly(t)
    H1, H2 = H.derivative(), H.derivative(2)
    return H - s * (s - 1) * H1 - (m - s) * Fraction(m - 1, m) * (2 * s * H1 + s * s * H2)


def delta_via_fs_poly(t: TruncatedLaw, m: int) -> RationalPoly:
    return sum((_f_poly(k, m) * p for k, p in enumerate(t.masses) if p), RationalPoly())


@dataclass(frozen=True)
class IdentityCheck:
    lhs: Any
    rhs: Any
    symbolic_equal: bool
    numeric_equal: bool

    @property
    def equal(self) -> bool:
        return self.symbolic_equal and self.numeric_equal


def _close(a, b) -> bool:
    if isinstance(a, Rational) and isinstance(b, Rational):
        return a == b
    scale = max(abs(a), abs(b), 1)
    return abs(a - b) <= mpmath.mpf(10) ** (-(MP_DPS - 10)) * scale


def _eval(poly: RationalPoly, s):
    if isinstance(s, Rational):
        return poly(Fraction(s))
    with mpmath.workdps(MP_DPS):
        return poly(_mp(s))


def dual_formula_check(t: TruncatedLaw, s, m: int) -> IdentityCheck:
    """Delta by definition against E(f_s(X))."""
    p1, p2 = delta_poly(t, m), delta_via_fs_poly(t, m)
    with mpmath.workdps(MP_DPS):
        a, b = _eval(p1, s), _eval(p2, s)
        return IdentityCheck(a, b, p1 == p2, _close(a, b))


def _sum_law(t: TruncatedLaw, m: int) -> list[Fraction]:
    """Masses of (X_1 + ... + X_m - 1)^+ by explicit m-fold convolution."""
    c = list(convolve_power(t.to_dist(), m).masses)
    if len(c) == 1:
        return c
    return [c[0] + c[1]] + c[2:]


def one_step_identity_polys(t: TruncatedLaw, m: int) -> tuple[RationalPoly, RationalPoly]:
    """s * E(f_s((X_1+...+X_m-1)^+)) and s * (closed form), as polynomials."""
    s = RationalPoly.x()
    law = _sum_law(t, m)
    lhs = s * sum((_f_poly(k, m) * p for k, p in enumerate(law) if p), RationalPoly())
    H = _s_poly(t)
    H1 = H.derivative()
    D = delta_poly(t, m)
    rhs = m * D * H ** (m - 1) - (m - s) * ((m - 1) * s * H1 - H) ** 2 * H ** (m - 2)
    return lhs, rhs


def one_step_delta_identity_check(t: TruncatedLaw, s, m: int) -> IdentityCheck:
    """E(f_s((X_1+...+X_m-1)^+)) against the closed form in Delta, H and H'.

    The identity is checked as an equality of polynomials in s (after
    clearing the 1/s factor) and, separately, at the given ``s``.
    """
    if not 1 < s <= m:
        raise ValueError("s must lie in (1, m]")
    lhs, rhs = one_step_identity_polys(t, m)
    with mpmath.workdps(MP_DPS):
        a, b = _eval(lhs, s), _eval(rhs, s)
        a, b = a / (Fraction(s) if isinstance(s, Rational) else _mp(s)), b / (
            Fraction(s) if isinstance(s, Rational) else _mp(s))
        return IdentityCheck(a, b, lhs == rhs, _close(a, b))


def gf_step_check(t: TruncatedLaw, s, m: int) -> bool:
    """E(s^((X_1+...+X_m-1)^+)) = H(s)^m / s + (1 - 1/s) H(0)^m, exactly."""
    law = _sum_law(t, m)
    with mpmath.workdps(MP_DPS):
        ps, s = _coerce(TruncatedLaw(tuple(law), 0, max(len(law) - 1, 1)), s)
        lhs = sum((p * s**k for k, p in enumerate(ps)), s * 0)
        h = H_and_derivs(t, s)[0]
        h0 = _coerce(t, s)[0][0]
        return _close(lhs, h**m / s + (1 - 1 / s) * h0**m)


# --- the root s_i ------------------------------------------------------------

@dataclass(frozen=True)
class Root:
    value: float
    lo: Fraction
    hi: Fraction

    def certified_ge(self, x) -> bool | None:
        """True/False when the bracket decides ``root >= x``, else None."""
        if self.lo >= x:
            return True
        if self.hi < x:
            return False
        return None


def g_value(t: TruncatedLaw, s, m: int):
    """E(((m-1)X - 1) s^X)."""
    ps = [Fraction(v) for v in t.masses]
    s = Fraction(s)
    return sum(((m - 1) * k - 1) * p * s**k for k, p in enumerate(ps) if p)


def solve_si(t: TruncatedLaw, m: int, *, lo: Fraction = Fraction(1, 10**6),
             hi: Fraction | None = None, rtol: float = 1e-12) -> Root:
    """Root of the nondecreasing g(s) = E(((m-1)X - 1) s^X) by bisection.

    Signs are evaluated exactly, so the returned bracket is certified.
    """
    hi = Fraction(64 * m) if hi is None else Fraction(hi)
    lo = Fraction(lo)
    ps = [Fraction(v) for v in t.masses]
    if all(((m - 1) * k - 1) * p == 0 for k, p in enumerate(ps)):
        raise DegenerateLaw(
            "g vanishes identically: all mass sits on k = 1 with m = 2 (X = 1 a.s.)")
    if not ps[0]:
        raise DegenerateLaw("no mass at 0, so g > 0 on (0, infinity) and has no root")
    glo, ghi = g_value(t, lo, m), g_value(t, hi, m)
    if glo == 0:
        return Root(float(lo), lo, lo)
    if ghi == 0:
        return Root(float(hi), hi, hi)
    if glo > 0 or ghi < 0:
        raise DegenerateLaw(f"g does not change sign on [{float(lo)}, {float(hi)}]")
    while hi - lo > rtol * lo:
        mid = (lo + hi) / 2
        # keep the bracket's denominators small
        mid = mid.limit_denominator(2**80) if mid.denominator > 2**80 else mid
        g = g_value(t, mid, m)
        if g == 0:
            return Root(float(mid), mid, mid)
        if g < 0:
            lo = mid
        else:
            hi = mid
    return Root(float((lo + hi) / 2), lo, hi)


# --- conditional inequalities ------------------------------------------------

@dataclass
class DeltaReport:
    """Delta and its ingredients for one truncated law at s = m^(1-delta)."""

    i: int
    M: int
    s: Any
    H: Any
    Hp: Any
    Hpp: Any
    Delta: Any
    s_i: Root | None
    preconditions: dict = field(default_factory=dict)
    cs: Status = Status.NOT_APPLICABLE
    lower_bound: Status = Status.NOT_APPLICABLE
    recursion: Status = Status.NOT_APPLICABLE

    @property
    def preconditions_met(self) -> bool:
        return all(self.preconditions.values()) and bool(self.preconditions)

    def row(self) -> dict:
        return {
            "i": self.i, "M": self.M, "s": float(self.s), "H": float(self.H),
            "Hp": float(self.Hp), "Hpp": float(self.Hpp), "Delta": float(self.Delta),
            "s_i": None if self.s_i is None else self.s_i.value,
            "lemma45_cs": self.cs.value, "lemma45_lb": self.lower_bound.value,
            "recursion_ineq": self.recursion.value,
            "preconditions_met": self.preconditions_met,
        }


def s_of_delta(m: int, dlt) -> mpmath.mpf:
    with mpmath.workdps(MP_DPS):
        return mpmath.power(m, 1 - _mp(dlt))


def lemma45_checks(t: TruncatedLaw, m: int, dlt=DEFAULT_DELTA, *,
                   n2_value: int | None = None) -> DeltaReport:
    """Cauchy-Schwarz type bound and Delta >= delta^2/128 at s = m^(1-delta).

    Both are conditional; when a hypothesis fails the report says
    ``not_applicable`` rather than pass or fail.  ``n2_value`` adds the
    generation window n2 <= i <= M-2 to the hypotheses.
    """
    with mpmath.workdps(MP_DPS):
        s = s_of_delta(m, dlt)
        h, h1, h2 = H_and_derivs(t, s)
        d = delta(t, s, m)
        try:
            root = solve_si(t, m)
        except DegenerateLaw:
            root = None
        pre = {"delta_range": 0 < dlt < Fraction(1, 16 * m)}
        threshold = m - m * Fraction(dlt) ** 3
        pre["s_i_defined"] = root is not None
        pre["s_i_near_m"] = bool(root is not None and root.certified_ge(threshold))
        if n2_value is not None:
            pre["generation_window"] = n2_value <= t.i <= t.M - 2
        rep = DeltaReport(t.i, t.M, s, h, h1, h2, d, root, pre)
        if rep.preconditions_met:
            h0 = _mp(t.masses[0])
            cs_ok = (h - (m - 1) * s * h1) ** 2 <= 2 * h0 * d
            lb_ok = d >= _mp(Fraction(dlt) ** 2 / 128)
            rep.cs = Status.PASS if cs_ok else Status.FAIL
            rep.lower_bound = Status.PASS if lb_ok else Status.FAIL
        return rep


def recursion_check(cur: DeltaReport, nxt: DeltaReport, m: int, dlt=DEFAULT_DELTA) -> Status:
    """Delta_{i+1} >= m^(-2 delta) Delta_i H_i^(m-1), gated on generation i."""
    if not cur.preconditions_met:
        return Status.NOT_APPLICABLE
    with mpmath.workdps(MP_DPS):
        rhs = mpmath.power(m, -2 * _mp(dlt)) * cur.Delta * cur.H ** (m - 1)
        return Status.PASS if nxt.Delta >= rhs else Status.FAIL


def delta_sweep(spec: ModelSpec, M: int, dlt=DEFAULT_DELTA) -> list[DeltaReport]:
    """Reports for i = 0..M-1 of one system, with the recursion inequality filled in."""
    if not spec.exact:
        raise ValueError("the Delta sweep runs in exact mode")
    m = spec.m
    laws = iterate(mix_initial(spec), m, M - 1)
    k = n2(spec.star)
    reps = [lemma45_checks(truncate(d, i, M), m, dlt, n2_value=k) for i, d in enumerate(laws)]
    for cur, nxt in zip(reps, reps[1:]):
        cur.recursion = recursion_check(cur, nxt, m, dlt)
    return reps


# --- n2 and its companion bound ----------------------------------------------

def n2(star: StarLaw) -> int:
    """floor(log(1/c1) / log(5/4)) + 1, evaluated exactly for rational c1."""
    c1 = Fraction(star.c1)
    if c1 <= 0:
        raise ValueError("n2 needs c1 = P(X_0^* >= 2) > 0")
    j = 0
    while c1 * Fraction(5, 4) ** (j + 1) <= 1:
        j += 1
    return j + 1


@dataclass(frozen=True)
class OneMassReport:
    n2: int
    worst: float
    worst_at: tuple
    passed: bool
    table: dict


def one_mass_check(star: StarLaw, p_grid: Sequence | None = None, extra: int = 10,
                   exact: bool = False) -> OneMassReport:
    """P(X_n = 1) <= 1/2 for n2 <= n <= n2 + extra over a grid of p (m = 2).

    Only the masses at 0 and 1 are tracked, through the exact lower window
    of the recursion; ``exact`` switches from floats to rationals.
    """
    k = n2(star)
    n_max = k + extra
    if p_grid is None:
        p_grid = [Fraction(j, 20) for j in range(1, 21)]
    table = {}
    worst, worst_at = -1.0, None
    for p in p_grid:
        spec = ModelSpec(2, star, Fraction(p) if exact else float(p))
        d0 = mix_initial(spec)
        win = lower_window(d0 if exact else d0.to_float(), 2, n_max, 1)
        for n in range(k, n_max + 1):
            v = win[n][1]
            table[(p, n)] = v
            if float(v) > worst:
                worst, worst_at = float(v), (p, n)
    passed = all(v <= Fraction(1, 2) if exact else float(v) <= 0.5 for v in table.values())
    return OneMassReport(k, worst, worst_at, passed, table)


def minus_fs_monotone(s, m: int, k_max: int = 50) -> bool:
    """-f_s(k) nondecreasing for k = 0..k_max."""
    vals = [f_s(k, s, m) for k in range(k_max + 1)]
    return all(b <= a for a, b in zip(vals, vals[1:]))


def g_monotone_on(t: TruncatedLaw, m: int, points: Sequence) -> bool:
    vals = [g_value(t, x, m) for x in sorted(points)]
    return all(b >= a for a, b in zip(vals, vals[1:]))


__all__ = [
    "DeltaReport", "DegenerateLaw", "IdentityCheck", "OneMassReport", "Root", "Status",
    "TruncatedLaw", "H_and_derivs", "delta", "delta_poly", "delta_sweep", "delta_via_fs",
    "delta_via_fs_poly", "dual_formula_check", "f_s", "g_monotone_on", "g_value",
    "gf_step_check", "lemma45_checks", "minus_fs_monotone", "n2", "one_mass_check",
    "one_step_delta_identity_check", "one_step_identity_polys", "recursion_check",
    "s_of_delta", "solve_si", "truncate",
]
