"""Exactly critical finite laws and the mixture-derivative experiment."""
from __future__ import annotations

from fractions import Fraction
from typing import Any, Iterable, Mapping

from .model import SpecError, criticality_value, parse_number
from .polymode import poly_iterate, poly_mixture

BASELINE_MU = {0: Fraction(4, 5), 2: Fraction(1, 5)}


def _weight(m: int, k: int) -> Fraction:
    # contribution of a unit mass at k to E(m^X) - (m-1) E(X m^X)
    return Fraction(1 - (m - 1) * k) * Fraction(m) ** k


def critical_law(m: int, fixed: Mapping[int, Any], solve_for: tuple[int, int]) -> dict[int, Fraction]:
    """Finite law with G = 0 exactly.

    Masses on ``fixed`` are given; the two points in ``solve_for`` take
    the rest, chosen so the total is 1 and the criticality functional
    vanishes (a 2x2 linear solve).
    """
    a, b = solve_for
    fixed = {int(k): Fraction(parse_number(v)) for k, v in fixed.items()}
    if a == b or a in fixed or b in fixed:
        raise ValueError("solve_for needs two distinct points outside the fixed support")
    rest = 1 - sum(fixed.values())
    g_rest = -sum(w * _weight(m, k) for k, w in fixed.items())
    ca, cb = _weight(m, a), _weight(m, b)
    if ca == cb:
        raise ValueError(f"points {a} and {b} carry the same criticality weight")
    wb = (g_rest - ca * rest) / (cb - ca)
    wa = rest - wb
    law = {**fixed, a: wa, b: wb}
    if any(w < 0 for w in law.values()):
        raise ValueError(f"no nonnegative critical law with these constraints: {law}")
    law = {k: w for k, w in sorted(law.items()) if w}
    assert criticality_value(law, m) == 0
    return law


def default_lambda(m: int = 2) -> dict[int, Fraction]:
    """A critical law on {0, 1, 3}, half its mass at 1."""
    return critical_law(m, {1: Fraction(1, 2)}, (0, 3))


def _check_critical(name: str, law: Mapping[int, Fraction], m: int) -> None:
    g = criticality_value(law, m)
    if g != 0:
        raise SpecError(f"{name} is not critical: G = {g} ({float(g):.6g})")


def mixture_mean_derivatives(m: int, mu: Mapping[int, Any], lam: Mapping[int, Any],
                             n_max: int, p_grid: Iterable[Any],
                             max_generation: int | None = None) -> list[dict]:
    """Rows (n, p, d/dp E(X_n)) for X_0 ~ (1-p) mu + p lambda, exact.

    Both laws must be critical and distinct; G is linear in the law, so
    every mixture is then critical too.
    """
    mu = {int(k): Fraction(parse_number(v)) for k, v in mu.items() if parse_number(v)}
    lam = {int(k): Fraction(parse_number(v)) for k, v in lam.items() if parse_number(v)}
    if mu == lam:
        raise SpecError("mu and lambda coincide; the mixture would not depend on p")
    _check_critical("mu", mu, m)
    _check_critical("lambda", lam, m)
    grid = [Fraction(parse_number(p)) for p in p_grid]
    if not grid:
        raise ValueError("empty p grid")
    rows = []
    for pd in poly_iterate(poly_mixture(m, mu, lam), n_max, max_generation):
        dmean = pd.mean().derivative()
        for p in grid:
            rows.append({"n": pd.generation, "p": p, "dmean_dp": dmean(p)})
    return rows


def p_grid(spec: str) -> list:
    """``a:b:steps`` to ``steps`` equally spaced points, exact for rational ends."""
    try:
        a, b, steps = spec.split(":")
        steps = int(steps)
    except ValueError as exc:
        raise ValueError(f"bad p grid {spec!r}; expected a:b:steps") from exc
    if steps < 1:
        raise ValueError("p grid is empty")
    a, b = parse_number(a), parse_number(b)
    if steps == 1:
        return [a]
    return [a + (b - a) * Fraction(j, steps - 1) if isinstance(a, Fraction) and isinstance(b, Fraction)
            else a + (b - a) * j / (steps - 1) for j in range(steps)]

