"""Distribution engine: m-fold convolution, the shifted positive part, iteration.

Exact distributions are stored as integer numerators over one common
denominator, so a step of the recursion is a single big-integer
convolution (see :mod:`drsys._kernels`) and no gcd work happens until a
mass is actually read out as a :class:`~fractions.Fraction`.
"""
from __future__ import annotations

import math
from collections import Counter
from enum import Enum
from fractions import Fraction
from numbers import Rational
from typing import Any, Mapping, Sequence

import numpy as np

from ._kernels import float_convolve_power, int_convolve, int_convolve_power

DEFAULT_FLOAT_CAP = 10**6
FLOAT_MASS_TOL = 1e-12


class SupportOverflow(RuntimeError):
    """The support of a distribution outgrew the configured cap."""


class TailPolicy(str, Enum):
    """What to do with mass that lands above the support cap.

    ``lump_at_cap`` keeps it as an absorbing "beyond the cap" state, which
    stochastically dominates the true law; ``lump_at_zero`` moves it to 0,
    which is stochastically dominated by the true law.
    """

    REJECT = "reject"
    LUMP_AT_CAP = "lump_at_cap"
    LUMP_AT_ZERO = "lump_at_zero"


class Dist:
    """Finite law on {0, ..., K} plus an optional lumped tail above K."""

    __slots__ = ("_num", "_den", "_tail_num", "_arr", "_tail")

    def __init__(self):
        raise TypeError("use Dist.from_masses, Dist.delta or the engine operations")

    @classmethod
    def _exact(cls, num: Sequence[int], den: int, tail_num: int = 0) -> Dist:
        num = list(num)
        while len(num) > 1 and num[-1] == 0:
            num.pop()
        if not num:
            num = [0]
        obj = object.__new__(cls)
        obj._num, obj._den, obj._tail_num = num, den, tail_num
        obj._arr = None
        obj._tail = None
        return obj

    @classmethod
    def _float(cls, arr: np.ndarray, tail: float = 0.0) -> Dist:
        arr = np.asarray(arr, dtype=float)
        nz = np.flatnonzero(arr)
        arr = arr[: nz[-1] + 1] if nz.size else arr[:1]
        if arr.size == 0:
            arr = np.zeros(1)
        obj = object.__new__(cls)
        obj._arr = arr
        obj._arr.setflags(write=False)
        obj._tail = float(tail)
        obj._num = obj._den = obj._tail_num = None
        return obj

    @classmethod
    def from_masses(
        cls, masses: Mapping[int, Any] | Sequence[Any], lumped_tail: Any = 0
    ) -> Dist:
        """Build from ``{k: mass}`` or a dense sequence indexed by k.

        Rational inputs give an exact distribution, anything else float.
        """
        if isinstance(masses, Mapping):
            items = {int(k): v for k, v in masses.items()}
        else:
            items = dict(enumerate(masses))
        if any(k < 0 for k in items):
            raise ValueError("negative support point")
        size = max(items, default=0) + 1
        values = list(items.values()) + [lumped_tail]
        if any(v < 0 for v in values):
            raise ValueError("negative mass")
        if all(isinstance(v, Rational) for v in values):
            fr = {k: Fraction(v) for k, v in items.items()}
            tail = Fraction(lumped_tail)
            den = math.lcm(tail.denominator, *(f.denominator for f in fr.values()))
            num = [0] * size
            for k, f in fr.items():
                num[k] = f.numerator * (den // f.denominator)
            tail_num = tail.numerator * (den // tail.denominator)
            if sum(num) + tail_num != den:
                raise ValueError("masses do not sum to 1")
            return cls._exact(num, den, tail_num)
        arr = np.zeros(size)
        for k, v in items.items():
            arr[k] = float(v)
        if abs(arr.sum() + float(lumped_tail) - 1.0) > FLOAT_MASS_TOL:
            raise ValueError(f"masses sum to {arr.sum() + float(lumped_tail)!r}, not 1")
        return cls._float(arr, float(lumped_tail))

    @classmethod
    def delta(cls, k: int, exact: bool = True) -> Dist:
        if exact:
            return cls._exact([0] * k + [1], 1)
        arr = np.zeros(k + 1)
        arr[k] = 1.0
        return cls._float(arr)

    # --- inspection -----------------------------------------------------

    @property
    def exact(self) -> bool:
        return self._arr is None

    @property
    def mode(self) -> str:
        return "exact_rational" if self.exact else "float64"

    @property
    def masses(self) -> list[Fraction] | np.ndarray:
        if self.exact:
            return [Fraction(v, self._den) for v in self._num]
        return self._arr

    @property
    def numerators(self) -> tuple[list[int], int]:
        """Raw integer numerators and the shared denominator (exact mode)."""
        if not self.exact:
            raise TypeError("float distribution has no numerators")
        return list(self._num), self._den

    @property
    def lumped_tail(self) -> Fraction | float:
        if self.exact:
            return Fraction(self._tail_num, self._den)
        return self._tail

    @property
    def support_max(self) -> int:
        return len(self) - 1

    def __len__(self) -> int:
        return len(self._num) if self.exact else len(self._arr)

    def __getitem__(self, k: int) -> Fraction | float:
        if k < 0 or k >= len(self):
            return Fraction(0) if self.exact else 0.0
        if self.exact:
            return Fraction(self._num[k], self._den)
        return float(self._arr[k])

    def as_dict(self) -> dict[int, Fraction | float]:
        return {k: self[k] for k in range(len(self)) if self[k] != 0}

    def total(self) -> Fraction | float:
        if self.exact:
            return Fraction(sum(self._num) + self._tail_num, self._den)
        return float(self._arr.sum()) + self._tail

    def mean(self) -> Fraction | float:
        """E(X), counting any lumped tail at K + 1 (a lower bound)."""
        k1 = len(self)
        if self.exact:
            s = sum(k * v for k, v in enumerate(self._num)) + k1 * self._tail_num
            return Fraction(s, self._den)
        return float(np.dot(np.arange(k1), self._arr)) + k1 * self._tail

    def expect(self, fn) -> Fraction | float:
        """E(fn(X)) over the finite part only."""
        if self.exact:
            return sum(
                (Fraction(v, self._den) * fn(k) for k, v in enumerate(self._num) if v),
                Fraction(0),
            )
        return sum(float(v) * fn(k) for k, v in enumerate(self._arr) if v)

    def to_float(self) -> Dist:
        if not self.exact:
            return self
        return Dist._float(np.array([float(m) for m in self.masses]), float(self.lumped_tail))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dist) or self.exact != other.exact:
            return NotImplemented
        if self.exact:
            return (
                len(self) == len(other)
                and all(a * other._den == b * self._den for a, b in zip(self._num, other._num))
                and self._tail_num * other._den == other._tail_num * self._den
            )
        return np.array_equal(self._arr, other._arr) and self._tail == other._tail

    __hash__ = None

    def __repr__(self) -> str:
        body = ", ".join(f"{k}: {v}" for k, v in list(self.as_dict().items())[:8])
        more = ", ..." if len(self.as_dict()) > 8 else ""
        tail = f", tail={self.lumped_tail}" if self.lumped_tail else ""
        return f"Dist({{{body}{more}}}{tail}, mode={self.mode})"


def _apply_cap(values, tail, cap, policy):
    if cap is None or len(values) <= cap + 1:
        return values, tail
    policy = TailPolicy(policy)
    over = values[cap + 1:]
    values = values[: cap + 1]
    spill = sum(over)
    if policy is TailPolicy.REJECT:
        raise SupportOverflow(
            f"support reached {len(values) + len(over) - 1} > cap {cap}; "
            "raise the cap or choose a lumping tail policy"
        )
    if policy is TailPolicy.LUMP_AT_CAP:
        return values, tail + spill
    values[0] += spill
    return values, tail


def _shift(c):
    # r(0) = c(0) + c(1), r(k) = c(k+1)
    if len(c) == 1:
        return c
    head = c[0] + c[1]
    if isinstance(c, np.ndarray):
        out = c[1:].copy()
        out[0] = head
        return out
    return [head] + list(c[2:])


def convolve_power(
    d: Dist, m: int, *, cap: int | None = None, policy: TailPolicy = TailPolicy.REJECT,
    method: str = "direct",
) -> Dist:
    """Law of the sum of m independent copies of ``d``."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if d.exact:
        c = int_convolve_power(d._num, m)
        den = d._den**m
        tail = den - (d._den - d._tail_num) ** m if d._tail_num else 0
        c, tail = _apply_cap(c, tail, cap, policy)
        return Dist._exact(c, den, tail)
    cap = DEFAULT_FLOAT_CAP if cap is None else cap
    c, _ = float_convolve_power(d._arr, m, method)
    tail = 1.0 - (1.0 - d._tail) ** m if d._tail else 0.0
    c, tail = _apply_cap(c, tail, cap, policy)
    return Dist._float(c, tail)


def dr_step(
    d: Dist, m: int, *, cap: int | None = None, policy: TailPolicy = TailPolicy.REJECT,
    method: str = "direct",
) -> Dist:
    """One step X -> (X_1 + ... + X_m - 1)^+ of the recursion."""
    if m < 2:
        raise ValueError("m must be >= 2")
    if d.exact:
        c = int_convolve_power(d._num, m)
        den = d._den**m
        tail = den - (d._den - d._tail_num) ** m if d._tail_num else 0
        r, tail = _apply_cap(_shift(c), tail, cap, policy)
        return Dist._exact(r, den, tail)
    cap = DEFAULT_FLOAT_CAP if cap is None else cap
    c, _ = float_convolve_power(d._arr, m, method)
    tail = 1.0 - (1.0 - d._tail) ** m if d._tail else 0.0
    r, tail = _apply_cap(_shift(c), tail, cap, policy)
    return Dist._float(r, tail)


def iterate(d0: Dist, m: int, n: int, **step_kw) -> list[Dist]:
    """Laws of X_0, ..., X_n."""
    if n < 0:
        raise ValueError("n must be >= 0")
    out = [d0]
    for _ in range(n):
        out.append(dr_step(out[-1], m, **step_kw))
    return out


def lower_window(d0: Dist | Sequence, m: int, n: int, width: int) -> list[list]:
    """Exact low masses P(X_j = k) for k <= width and j <= n.

    The recursion never moves mass downward by more than one per step, so
    the masses of X_j on {0..w} depend only on those of X_{j-1} on
    {0..w+1}.  Starting from {0..width+n} at generation 0 costs O(n width^2)
    however wide the true support is.
    """
    masses = list(d0.masses) if isinstance(d0, Dist) else list(d0)
    size = width + n + 1
    zero = masses[0] * 0
    cur = (masses + [zero] * size)[:size]
    out = [cur[: width + 1]]
    for j in range(1, n + 1):
        size -= 1
        acc = cur[: size + 1]
        for _ in range(m - 1):
            acc = [
                sum((acc[i] * cur[k - i] for i in range(k + 1)), zero)
                for k in range(size + 1)
            ]
        cur = [acc[0] + acc[1]] + acc[2: size + 1] if size >= 1 else [acc[0]]
        # keep exactly size entries for the next generation
        cur = cur[:size]
        out.append(cur[: width + 1])
    return out


def _leaf_law(spec) -> tuple[np.ndarray, np.ndarray]:
    from .model import mix_initial

    law = mix_initial(spec).as_dict()
    values = np.array(sorted(law), dtype=np.int64)
    probs = np.array([float(law[k]) for k in sorted(law)])
    return values, probs / probs.sum()


def sample_xn(
    spec, n: int, rng_seed: int | None = 0, n_samples: int = 10_000,
    chunk_entries: int = 4_000_000,
) -> Counter:
    """Monte Carlo histogram of X_n from simulated hierarchical trees.

    Each sample draws m**n i.i.d. leaves from the law of X_0 and folds them
    level by level.  Chunks get child seeds spawned from one
    :class:`numpy.random.SeedSequence`, so results depend only on the seed.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    m = spec.m
    values, probs = _leaf_law(spec)
    leaves = m**n
    per_chunk = max(1, chunk_entries // leaves)
    n_chunks = -(-n_samples // per_chunk)
    seeds = np.random.SeedSequence(rng_seed).spawn(n_chunks)
    hist: Counter = Counter()
    left = n_samples
    for ss in seeds:
        size = min(per_chunk, left)
        left -= size
        rng = np.random.default_rng(ss)
        x = values[rng.choice(len(values), size=(size, leaves), p=probs)]
        for _ in range(n):
            x = x.reshape(size, -1, m).sum(axis=2) - 1
            np.maximum(x, 0, out=x)
        ks, counts = np.unique(x[:, 0], return_counts=True)
        hist.update(dict(zip(ks.tolist(), counts.tolist())))
    return hist


def total_variation(hist: Mapping[int, int], d: Dist) -> float:
    """TV distance between an empirical histogram and a law."""
    total = sum(hist.values())
    ks = set(hist) | set(range(len(d)))
    tv = sum(abs(hist.get(k, 0) / total - float(d[k])) for k in ks)
    return 0.5 * (tv + float(d.lumped_tail))


def convolve(a: Dist, b: Dist) -> Dist:
    """Law of the sum of two independent variables (finite parts only)."""
    if a.exact and b.exact and not a._tail_num and not b._tail_num:
        return Dist._exact(int_convolve(a._num, b._num), a._den * b._den)
    a, b = a.to_float(), b.to_float()
    if a._tail or b._tail:
        raise ValueError("convolve() does not handle lumped tails")
    return Dist._float(np.convolve(a._arr, b._arr))
