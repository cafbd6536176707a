"""Moments, the criticality functional, free-energy brackets, tail checks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Any, NamedTuple

import numpy as np

from .engine import Dist, TailPolicy, convolve_power, iterate
from .model import ModelSpec, Phase, mix_initial, phase_of


class PreconditionError(ValueError):
    """A conditional statement was asked for outside its hypotheses."""


class Moments(NamedTuple):
    mean: Any
    gf: Any
    xgf: Any
    divergent: bool


def moments(d: Dist, s: Any) -> Moments:
    """(E X, E s^X, E X s^X), exact for exact ``d`` and rational ``s``.

    A lumped tail makes E(s^X) unbounded above for s > 1, which is
    reported through ``divergent``; the returned values then cover the
    finite part only.
    """
    if s <= 0:
        raise ValueError("s must be positive")
    if d.exact and isinstance(s, Rational):
        num, den = d.numerators
        s = Fraction(s)
        mean = Fraction(sum(k * v for k, v in enumerate(num)), den)
        gf = xgf = Fraction(0)
        pw = Fraction(1)
        for k, v in enumerate(num):
            if v:
                gf += v * pw
                xgf += k * v * pw
            pw *= s
        gf /= den
        xgf /= den
    else:
        arr = np.asarray([float(x) for x in d.masses]) if d.exact else d.masses
        ks = np.arange(len(arr))
        pw = float(s) ** ks
        mean = float(ks @ arr)
        gf = float(pw @ arr)
        xgf = float((ks * pw) @ arr)
    divergent = bool(d.lumped_tail) and s > 1
    return Moments(mean, gf, xgf, divergent)


@dataclass(frozen=True)
class CriticalityFunctional:
    """G = E(m^X) - (m-1) E(X m^X) with a divergence flag."""

    value: Any
    divergent: bool = False

    @property
    def phase(self) -> Phase:
        if self.divergent:
            return Phase.SUPERCRITICAL
        return phase_of(self.value)

    @property
    def sign(self) -> int:
        return {Phase.SUBCRITICAL: 1, Phase.CRITICAL: 0, Phase.SUPERCRITICAL: -1}[self.phase]


def criticality_functional(d: Dist, m: int) -> CriticalityFunctional:
    mo = moments(d, m)
    return CriticalityFunctional(mo.gf - (m - 1) * mo.xgf, mo.divergent)


@dataclass(frozen=True)
class FreeEnergyBracket:
    """L_N <= F_inf <= U_N together with the partial series S_N."""

    N: int
    L: Any
    U: Any
    S: Any
    mean: Any = field(default=None, compare=False)
    zero_mass: Any = field(default=None, compare=False)


def free_energy_brackets(
    spec: ModelSpec, N: int, *, float_mode: bool | None = None, **step_kw
) -> list[FreeEnergyBracket]:
    """Brackets for generations 0..N from one pass of the recursion.

    ``float_mode`` defaults to exact whenever the spec allows it.
    """
    if N < 0:
        raise ValueError("N must be >= 0")
    m = spec.m
    d0 = mix_initial(spec)
    if float_mode:
        d0 = d0.to_float()
    exact = d0.exact
    one = Fraction(1) if exact else 1.0
    laws = iterate(d0, m, N, **step_kw)
    mean0 = laws[0].mean()
    s = mean0 - one / (m - 1)
    out = []
    for n, law in enumerate(laws):
        mn = law.mean()
        scale = one * m**n
        s += law[0] ** m / (scale * m)
        out.append(FreeEnergyBracket(
            N=n,
            L=(mn - one / (m - 1)) / scale,
            U=mn / scale,
            S=s,
            mean=mn,
            zero_mass=law[0],
        ))
    return out


def free_energy_bracket(spec: ModelSpec, N: int, **kw) -> FreeEnergyBracket:
    return free_energy_brackets(spec, N, **kw)[-1]


@dataclass(frozen=True)
class SignReport:
    values: list
    signs: list[int]

    @property
    def constant(self) -> bool:
        return len(set(self.signs)) <= 1

    @property
    def sign(self) -> int | None:
        return self.signs[0] if self.constant and self.signs else None


def sign_preservation_check(spec: ModelSpec, N: int) -> SignReport:
    """G_n for n = 0..N in exact arithmetic; 0 is its own sign class."""
    if not spec.exact:
        raise PreconditionError("sign preservation is checked in exact mode only")
    laws = iterate(mix_initial(spec), spec.m, N)
    fs = [criticality_functional(d, spec.m) for d in laws]
    return SignReport([f.value for f in fs], [f.sign for f in fs])


def hoeffding_threshold(m: int, k: int, c1: Any) -> int:
    """Smallest n allowed by the tail lemma for given k and c1."""
    c1 = float(c1)
    return math.floor((math.log(k) + math.log((4 + c1) / c1)) / math.log(m)) + 1


class HoeffdingReport(NamedTuple):
    mc_estimate: float
    stderr: float
    bound: float
    exact: Any
    passed: bool
    n_samples: int
    seed: int | None


def hoeffding_tail_check(
    spec: ModelSpec, n: int, k: int, n_samples: int = 100_000, seed: int | None = 0,
    exact: bool = True,
) -> HoeffdingReport:
    """Monte Carlo estimate of P(sum_{i <= m^n - k} X_{0,i} <= m^n) vs exp(-c1^2 (m^n-k)/32).

    Raises :class:`PreconditionError` outside the lemma's hypotheses
    instead of silently returning a vacuous pass.  With ``exact`` the
    probability is also computed by direct convolution as a cross-check.
    """
    m, c1 = spec.m, spec.star.c1
    if c1 <= 0:
        raise PreconditionError("needs c1 = P(X_0^* >= 2) > 0")
    if not 1 - c1 / 4 <= spec.p <= 1:
        raise PreconditionError(f"p = {spec.p} is outside [1 - c1/4, 1] = [{1 - c1 / 4}, 1]")
    if k < 1:
        raise PreconditionError("k must be >= 1")
    threshold = hoeffding_threshold(m, k, c1)
    if n < threshold:
        raise PreconditionError(f"n = {n} is below the threshold {threshold} for k = {k}")
    count = m**n - k
    if count < 1:
        raise PreconditionError("m^n - k must be positive")
    bound = math.exp(-float(c1) ** 2 * count / 32)
    law = mix_initial(spec)
    values = np.array(sorted(law.as_dict()), dtype=np.int64)
    probs = np.array([float(law[v]) for v in values])
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(count, probs / probs.sum(), size=n_samples)
    hits = int(np.count_nonzero(counts @ values <= m**n))
    est = hits / n_samples
    stderr = math.sqrt(est * (1 - est) / n_samples)
    exact_p = None
    if exact:
        total = convolve_power(law, count)
        exact_p = sum((total[j] for j in range(min(len(total), m**n + 1))), total[0] * 0)
    return HoeffdingReport(est, stderr, bound, exact_p, est <= bound + 3 * stderr,
                           n_samples, seed)


class DecayProfile(NamedTuple):
    n: list[int]
    zero_mass: list[float]
    loglog: list[float]
    increments: list[float]


def zero_mass_decay_profile(
    spec: ModelSpec, n_max: int, *, cap: int = 10**6,
    policy: TailPolicy = TailPolicy.LUMP_AT_CAP,
) -> DecayProfile:
    """log(-log P(X_n = 0)) for n <= n_max, in float mode.

    In the supercritical phase P(X_n = 0) decays doubly exponentially, so
    the increments approach log m.
    """
    laws = iterate(mix_initial(spec).to_float(), spec.m, n_max, cap=cap, policy=policy)
    z = [float(d[0]) for d in laws]
    ll = []
    for v in z:
        if 0 < v < 1:
            ll.append(math.log(-math.log(v)))
        else:
            ll.append(math.nan if v >= 1 else math.inf)
    inc = [math.nan] + [b - a for a, b in zip(ll, ll[1:])]
    return DecayProfile(list(range(n_max + 1)), z, ll, inc)


def mean_identity_residuals(laws: list[Dist], m: int) -> list:
    """E(X_{n+1}) - (m E(X_n) - 1 + P(X_n=0)^m) for consecutive laws."""
    return [
        b.mean() - (m * a.mean() - 1 + a[0] ** m) for a, b in zip(laws, laws[1:])
    ]


def classify_law(d: Dist, m: int) -> Phase:
    return criticality_functional(d, m).phase
