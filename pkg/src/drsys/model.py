"""System specifications: branching factor, star law, mixing parameter."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from numbers import Rational
from pathlib import Path
from typing import Any, Mapping, Union

from .engine import Dist

Number = Union[Fraction, float]

# float-mode dead band for the criticality functional
FLOAT_CRITICAL_BAND = 1e-9


class SpecError(ValueError):
    """Raised for an invalid star law or model specification."""


def parse_number(x: Any) -> Number:
    """Read a probability-like value, keeping rationals exact.

    Strings (``"1/5"``, ``"3"``, ``"0.15"``) and Python ints/Fractions become
    :class:`Fraction`; only genuine floats stay float.
    """
    if isinstance(x, bool):
        raise SpecError(f"not a number: {x!r}")
    if isinstance(x, Rational):
        return Fraction(x)
    if isinstance(x, float):
        return x
    if isinstance(x, str):
        s = x.strip()
        try:
            return Fraction(s)
        except (ValueError, ZeroDivisionError) as exc:
            raise SpecError(f"cannot parse number {x!r}") from exc
    raise SpecError(f"not a number: {x!r}")


def format_number(x: Number) -> Union[str, float]:
    """JSON-friendly form: rationals as ``"num/den"`` strings."""
    if isinstance(x, Fraction):
        return str(x)
    return float(x)


def _is_exact(x: Any) -> bool:
    return isinstance(x, Rational)


class Phase(str, Enum):
    SUBCRITICAL = "subcritical"
    CRITICAL = "critical"
    SUPERCRITICAL = "supercritical"


@dataclass(frozen=True)
class StarLaw:
    """Law of X_0^*, supported on the positive integers.

    Build instances with :meth:`dirac`, :meth:`finite` or
    :meth:`power_geometric` rather than calling the constructor.
    """

    kind: str
    masses: tuple[tuple[int, Number], ...]
    alpha: float | None = None
    k_max: int | None = None
    base: int | None = None
    # pre-normalisation mass of the dropped tail k > k_max (power_geometric)
    dropped_tail: float = 0.0

    def __post_init__(self):
        if not self.masses:
            raise SpecError("star law needs at least one support point")
        ks = [k for k, _ in self.masses]
        if ks != sorted(set(ks)):
            raise SpecError("support points must be sorted and distinct")
        if ks[0] < 1:
            raise SpecError("star law must be supported on {1, 2, 3, ...}")
        if any(w < 0 for _, w in self.masses):
            raise SpecError("negative mass in star law")
        total = sum(w for _, w in self.masses)
        if self.exact:
            if total != 1:
                raise SpecError(f"star masses sum to {total}, not 1")
        elif abs(float(total) - 1.0) > 1e-12:
            raise SpecError(f"star masses sum to {float(total)!r}, not 1")

    @classmethod
    def dirac(cls, k0: int) -> StarLaw:
        if int(k0) != k0 or k0 < 1:
            raise SpecError(f"dirac point must be a positive integer, got {k0!r}")
        return cls("dirac", ((int(k0), Fraction(1)),))

    @classmethod
    def finite(cls, masses: Mapping[Any, Any]) -> StarLaw:
        items = []
        for k, w in masses.items():
            k = int(k)
            w = parse_number(w)
            if w:
                items.append((k, w))
        items.sort()
        return cls("finite", tuple(items))

    @classmethod
    def power_geometric(cls, alpha: float, k_max: int, m: int) -> StarLaw:
        """Masses proportional to ``m**-k * k**-alpha`` on ``1..k_max``.

        Integer ``alpha`` keeps the masses exact.  ``dropped_tail`` is the
        fraction of the untruncated weight that lives above ``k_max``.
        """
        if k_max < 1:
            raise SpecError("k_max must be >= 1")
        if m < 2:
            raise SpecError("m must be >= 2")
        integral = float(alpha).is_integer()
        if integral:
            a = int(alpha)
            raw = [
                Fraction(1, m**k) * (Fraction(1, k**a) if a >= 0 else k ** (-a))
                for k in range(1, k_max + 1)
            ]
        else:
            raw = [m ** (-k) * k ** (-alpha) for k in range(1, k_max + 1)]
        z = sum(raw)
        head = float(z)
        tail = 0.0
        k = k_max + 1
        # terms decay geometrically once m**-k beats k**-alpha
        while k < k_max + 100_000:
            t = math.exp(-k * math.log(m) - alpha * math.log(k))
            tail += t
            if t < 1e-18 * (head + tail) and k > 2 * abs(alpha) / math.log(m):
                break
            k += 1
        masses = tuple((k, w / z) for k, w in enumerate(raw, start=1))
        return cls(
            "power_geometric",
            masses,
            alpha=float(alpha),
            k_max=int(k_max),
            base=int(m),
            dropped_tail=tail / (head + tail),
        )

    @property
    def exact(self) -> bool:
        return all(_is_exact(w) for _, w in self.masses)

    @property
    def support(self) -> list[int]:
        return [k for k, _ in self.masses]

    def pmf(self) -> dict[int, Number]:
        return dict(self.masses)

    @property
    def c1(self) -> Number:
        """P(X_0^* >= 2)."""
        return sum((w for k, w in self.masses if k >= 2), Fraction(0))

    @property
    def divergent(self) -> bool:
        """True when the untruncated family has E(X* m^X*) = infinity.

        With weights m^-k k^-alpha the series sum k * k^-alpha diverges
        exactly when alpha <= 2.
        """
        return self.kind == "power_geometric" and self.alpha <= 2

    def expect(self, fn) -> Number:
        return sum((w * fn(k) for k, w in self.masses), Fraction(0))

    def to_json(self) -> dict:
        if self.kind == "dirac":
            return {"kind": "dirac", "k0": self.masses[0][0]}
        if self.kind == "power_geometric":
            return {
                "kind": "power_geometric",
                "alpha": self.alpha,
                "k_max": self.k_max,
                "m": self.base,
            }
        return {
            "kind": "finite",
            "masses": {str(k): format_number(w) for k, w in self.masses},
        }

    @classmethod
    def from_json(cls, obj: Mapping[str, Any], m: int | None = None) -> StarLaw:
        kind = obj.get("kind")
        if kind == "dirac":
            return cls.dirac(int(obj["k0"]))
        if kind == "finite":
            return cls.finite(obj["masses"])
        if kind == "power_geometric":
            base = obj.get("m", m)
            if base is None:
                raise SpecError("power_geometric star needs m")
            return cls.power_geometric(float(obj["alpha"]), int(obj["k_max"]), int(base))
        raise SpecError(f"unknown star kind {kind!r}")


@dataclass(frozen=True)
class ModelSpec:
    """A Derrida-Retaux system: X_0 ~ (1-p) delta_0 + p * star."""

    m: int
    star: StarLaw
    p: Number = field(default=Fraction(0))

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise SpecError(f"m must be an integer >= 2, got {self.m!r}")
        p = parse_number(self.p)
        object.__setattr__(self, "p", p)
        if not 0 <= p <= 1:
            raise SpecError(f"p must lie in [0, 1], got {p!r}")
        if self.m == 2 and self.star.c1 == 0:
            raise SpecError("m = 2 requires P(X_0^* >= 2) > 0")
        if self.star.kind == "power_geometric" and self.star.base != self.m:
            raise SpecError("power_geometric base must equal m")

    @property
    def exact(self) -> bool:
        return self.star.exact and _is_exact(self.p)

    def with_p(self, p: Any) -> ModelSpec:
        return ModelSpec(self.m, self.star, parse_number(p))

    def to_json(self) -> dict:
        return {"m": self.m, "star": self.star.to_json(), "p": format_number(self.p)}

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> ModelSpec:
        try:
            m = int(obj["m"])
            star = StarLaw.from_json(obj["star"], m=m)
        except KeyError as exc:
            raise SpecError(f"model spec is missing field {exc.args[0]!r}") from exc
        return cls(m, star, parse_number(obj.get("p", "0")))


def load_spec(path: str | Path) -> ModelSpec:
    with open(path) as fh:
        return ModelSpec.from_json(json.load(fh))


def dump_spec(spec: ModelSpec, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(spec.to_json(), fh, indent=2)


def mix_initial(spec: ModelSpec) -> Dist:
    """Law of X_0 = (1 - p) delta_0 + p P_{X_0^*}."""
    p = spec.p
    masses = {0: 1 - p}
    for k, w in spec.star.masses:
        masses[k] = masses.get(k, 0) + p * w
    if spec.exact:
        return Dist.from_masses(masses)
    return Dist.from_masses({k: float(v) for k, v in masses.items()})


def critical_p(m: int, star: StarLaw) -> Number:
    """p_c = 1 / (1 + E(((m-1) X* - 1) m^X*)).

    Returns 0 for star families flagged divergent, which are
    supercritical for every p > 0.
    """
    if m < 2:
        raise SpecError("m must be >= 2")
    if star.divergent:
        return Fraction(0) if star.exact else 0.0
    e = star.expect(lambda k: ((m - 1) * k - 1) * Fraction(m) ** k)
    if e <= 0:
        raise SpecError(
            "degenerate star law: E(((m-1)X*-1) m^X*) <= 0 gives no critical point"
        )
    return 1 / (1 + e)


def criticality_value(masses: Mapping[int, Number], m: int, s: Number | None = None) -> Number:
    """G = E(s^X) - (m-1) E(X s^X) for a finite law, with s = m by default."""
    s = m if s is None else s
    return sum(
        (w * (1 - (m - 1) * k) * (Fraction(s) ** k if _is_exact(s) else s**k)
         for k, w in masses.items()),
        Fraction(0),
    )


def phase_of(g: Number) -> Phase:
    if isinstance(g, float) and abs(g) <= FLOAT_CRITICAL_BAND:
        return Phase.CRITICAL
    if g > 0:
        return Phase.SUBCRITICAL
    if g < 0:
        return Phase.SUPERCRITICAL
    return Phase.CRITICAL


def classify(spec: ModelSpec) -> Phase:
    """Sign class of (m-1) E(X_0 m^X_0) - E(m^X_0)."""
    if spec.star.divergent and spec.p > 0:
        return Phase.SUPERCRITICAL
    law = mix_initial(spec)
    return phase_of(criticality_value(law.as_dict(), spec.m))
