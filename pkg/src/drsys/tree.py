"""Hierarchical tree calculus: substitution, inclusion-exclusion derivative, O/L sets.

The tree T^{e_n} is never stored.  A vertex is ``(level, index)`` where the
base-m digits of ``index`` are its path from the root e_n = (n, 0).  The
m parents of (l, j) are (l-1, m*j + t) for t < m, and the descendant of
leaf (0, j) at level i is (i, j // m**i).  Leaf values are numpy arrays of
length m**n, with any leading axes treated as a batch, so a whole family
of Theta^B X for B ranging over the subsets of A folds in one pass.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from .engine import Dist, iterate
from .model import StarLaw, mix_initial, ModelSpec
from .polymode import BudgetExceeded, RationalPoly, poly_initial, poly_iterate

Vertex = tuple[int, int]
NABLA_MAX = 12
CONFIG_BUDGET = 1 << 20


# --- addressing ----------------------------------------------------------------

@dataclass(frozen=True)
class TreeIndex:
    m: int
    n: int

    def __post_init__(self):
        if self.m < 2 or self.n < 0:
            raise ValueError("need m >= 2 and n >= 0")

    @property
    def n_leaves(self) -> int:
        return self.m**self.n

    @property
    def root(self) -> Vertex:
        return (self.n, 0)

    def level_size(self, level: int) -> int:
        return self.m ** (self.n - level)

    def parents(self, v: Vertex) -> list[Vertex]:
        level, j = v
        if level == 0:
            return []
        return [(level - 1, self.m * j + t) for t in range(self.m)]

    def descendant(self, leaf: int, level: int) -> Vertex:
        return (level, leaf // self.m**level)

    def leaves_under(self, v: Vertex) -> range:
        level, j = v
        w = self.m**level
        return range(j * w, (j + 1) * w)

    def path(self, v: Vertex) -> tuple[int, ...]:
        """Digits d_1..d_{n-l} in {1..m} leading from the root to ``v``."""
        level, j = v
        digits = []
        for _ in range(self.n - level):
            j, r = divmod(j, self.m)
            digits.append(r + 1)
        return tuple(reversed(digits))

    def vertices(self) -> Iterable[Vertex]:
        for level in range(self.n + 1):
            for j in range(self.level_size(level)):
                yield (level, j)


@lru_cache(maxsize=None)
def o_set(m: int, level: int, A: frozenset) -> frozenset:
    """O_{u,A} = {v_i : v in A, 1 <= i <= |u|} for u at ``level`` above A."""
    return frozenset((i, v // m**i) for v in A for i in range(1, level + 1))


@lru_cache(maxsize=None)
def l_set(m: int, level: int, A: frozenset) -> frozenset:
    """Side-entry vertices: parents of O that are neither in O nor in A."""
    O = o_set(m, level, A)
    leaves = {(0, v) for v in A}
    par = {(lv - 1, m * j + t) for lv, j in O for t in range(m)}
    return frozenset(par - O - leaves)


# --- assignments and evaluation ------------------------------------------------

@dataclass(frozen=True)
class LeafAssignment:
    """(X_0^*(v), U(v)) on the m**n leaves; X(v) = x_star * u."""

    x_star: tuple[int, ...]
    u: tuple[int, ...]
    m: int

    def __post_init__(self):
        N = len(self.x_star)
        if N != len(self.u):
            raise ValueError("x_star and u differ in length")
        n = round(math.log(N, self.m)) if N > 0 else -1
        if N == 0 or self.m**n != N:
            raise ValueError(f"incomplete assignment: {N} leaves is not a power of m={self.m}")
        if any(x < 1 for x in self.x_star) or any(b not in (0, 1) for b in self.u):
            raise ValueError("x_star must be >= 1 and u must be 0/1")

    @property
    def n(self) -> int:
        return round(math.log(len(self.x_star), self.m))

    @property
    def leaf_values(self) -> np.ndarray:
        return np.asarray(self.x_star) * np.asarray(self.u)


def fold(leaves: np.ndarray, m: int) -> list[np.ndarray]:
    """Values at every level, bottom-up, for a (batch of) leaf vectors."""
    x = np.asarray(leaves, dtype=np.int64)
    out = [x]
    while x.shape[-1] > 1:
        x = x.reshape(*x.shape[:-1], -1, m).sum(axis=-1) - 1
        np.maximum(x, 0, out=x)
        out.append(x)
    return out


def eval_tree(a: LeafAssignment) -> int:
    """X(e_n) for one assignment."""
    return int(fold(a.leaf_values, a.m)[-1][0])


def _theta_leaves(x_star: np.ndarray, u: np.ndarray, A: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Leaf vectors of Theta^B X for every B subset of A, and the signs (-1)^{|A|-|B|}.

    Row b corresponds to the bitmask b over the ordered tuple ``A``.
    """
    A = list(A)
    k = len(A)
    if k > NABLA_MAX:
        raise BudgetExceeded(f"|A| = {k} exceeds the subset budget {NABLA_MAX}")
    base = x_star * u
    masks = (np.arange(1 << k)[:, None] >> np.arange(k)) & 1
    rows = np.broadcast_to(base, (1 << k, base.shape[-1])).copy()
    if k:
        rows[:, A] = np.where(masks.astype(bool), x_star[A], base[A])
    signs = np.where((k - masks.sum(axis=1)) % 2 == 0, 1, -1)
    return rows, signs


def theta(a: LeafAssignment, A: Iterable[int]) -> list[np.ndarray]:
    """All level values of Theta^A X."""
    xs = np.asarray(a.x_star)
    leaves = a.leaf_values.copy()
    idx = list(A)
    leaves[idx] = xs[idx]
    return fold(leaves, a.m)


Predicate = Callable[[list[np.ndarray]], np.ndarray]


def root_equals(i: int) -> Predicate:
    return lambda levels: levels[-1][..., 0] == i


def leaves_equal(x: Sequence[int]) -> Predicate:
    x = np.asarray(x)
    return lambda levels: np.all(levels[0] == x, axis=-1)


def nabla(a: LeafAssignment, A: Iterable[int], pred: Predicate | int) -> int:
    """sum over B subset of A of (-1)^{|A|-|B|} f(Theta^B X).

    An integer ``pred`` is shorthand for the event X(e_n) = pred.
    """
    if isinstance(pred, int):
        pred = root_equals(pred)
    rows, signs = _theta_leaves(np.asarray(a.x_star), np.asarray(a.u), list(A))
    vals = np.asarray(pred(fold(rows, a.m)), dtype=np.int64)
    return int(signs @ vals)


# --- exhaustive configuration space --------------------------------------------

@dataclass(frozen=True)
class Configs:
    """Every joint leaf state (x_star, u), weighted by p^{#u=1}(1-p)^{#u=0}."""

    x_star: np.ndarray
    u: np.ndarray
    coef: list[Fraction]
    ones: np.ndarray

    def weight_poly(self, select: np.ndarray | None = None, mult: np.ndarray | None = None) -> RationalPoly:
        """sum of coef * mult * p^ones (1-p)^(N - ones) over the selected rows."""
        N = self.u.shape[1]
        acc: dict[int, Fraction] = {}
        rows = range(len(self.coef)) if select is None else np.flatnonzero(select)
        for r in rows:
            w = self.coef[r] * (1 if mult is None else int(mult[r]))
            if w:
                a = int(self.ones[r])
                acc[a] = acc.get(a, 0) + w
        return sum((c * _bern(a, N - a) for a, c in acc.items()), RationalPoly())


@lru_cache(maxsize=None)
def _bern(a: int, b: int) -> RationalPoly:
    return RationalPoly.x() ** a * (1 - RationalPoly.x()) ** b


def all_configs(m: int, n: int, star: StarLaw) -> Configs:
    if not star.exact:
        raise ValueError("exhaustive enumeration needs an exact star law")
    N = m**n
    states = [(x, b) for x in star.support for b in (0, 1)]
    total = len(states) ** N
    if total > CONFIG_BUDGET:
        raise BudgetExceeded(f"{total} leaf configurations exceed the budget {CONFIG_BUDGET}")
    pmf = star.pmf()
    combos = np.array(list(itertools.product(range(len(states)), repeat=N)), dtype=np.int64)
    combos = combos.reshape(total, N)
    sx = np.array([s[0] for s in states])
    su = np.array([s[1] for s in states])
    xs, us = sx[combos], su[combos]
    coef = [math.prod((Fraction(pmf[int(x)]) for x in row), start=Fraction(1)) for row in xs]
    return Configs(xs, us, coef, us.sum(axis=1))


def _nabla_batch(cfg: Configs, A: Sequence[int], pred: Predicate, m: int) -> np.ndarray:
    """nabla^A pred for every configuration at once."""
    A = list(A)
    k = len(A)
    if k > NABLA_MAX:
        raise BudgetExceeded(f"|A| = {k} exceeds the subset budget {NABLA_MAX}")
    base = cfg.x_star * cfg.u
    out = np.zeros(len(base), dtype=np.int64)
    for b in range(1 << k):
        B = [A[t] for t in range(k) if b >> t & 1]
        leaves = base.copy()
        leaves[:, B] = cfg.x_star[:, B]
        sign = -1 if (k - len(B)) % 2 else 1
        out += sign * np.asarray(pred(fold(leaves, m)), dtype=np.int64)
    return out


def _zero_on(cfg: Configs, A: Sequence[int]) -> np.ndarray:
    A = list(A)
    return np.all(cfg.u[:, A] == 0, axis=1) if A else np.ones(len(cfg.u), dtype=bool)


# --- derivative identities -------------------------------------------------------

@dataclass(frozen=True)
class DerivativeCheck:
    target: tuple
    lhs: Fraction
    rhs: Fraction
    poly_equal: bool

    @property
    def equal(self) -> bool:
        return self.poly_equal and self.lhs == self.rhs


def _tree_rhs_poly(cfg: Configs, m: int, n: int, k: int, pred: Predicate) -> RationalPoly:
    """sum_{|A|=k} E(1_{X|A=0} nabla^A pred) as a polynomial in p."""
    total = RationalPoly()
    for A in itertools.combinations(range(m**n), k):
        vals = _nabla_batch(cfg, A, pred, m)
        total = total + cfg.weight_poly(_zero_on(cfg, A), vals)
    return total


def _leaf_target_poly(star: StarLaw, x: Sequence[int]) -> RationalPoly:
    """P(X(v) = x_v for all leaves) = alpha p^|D| (1-p)^(N-|D|)."""
    pmf = star.pmf()
    D = [v for v in x if v > 0]
    alpha = math.prod((Fraction(pmf.get(v, 0)) for v in D), start=Fraction(1))
    return alpha * _bern(len(D), len(x) - len(D))


def _fact_over(k: int, p: Fraction) -> Fraction:
    return Fraction(math.factorial(k)) / (1 - p) ** k


def lemma31_check(m: int, n: int, k: int, star: StarLaw, p, *,
                  targets: Iterable[Sequence[int]] | None = None) -> list[DerivativeCheck]:
    """d^k/dp^k P(leaves = x) against k!/(1-p)^k sum_{|A|=k} E(1_{X|A=0} nabla^A 1_{leaves=x}).

    Both sides are built as polynomials in p (the right one after
    clearing (1-p)^k) and also compared at ``p``.  By default every target
    with entries in 0..max(n, max support) is checked.
    """
    N = m**n
    if N > 16:
        raise BudgetExceeded("lemma31_check enumerates at most 16 leaves")
    p = Fraction(p)
    if not 0 <= p < 1:
        raise ValueError("p must lie in [0, 1)")
    cfg = all_configs(m, n, star)
    if targets is None:
        top = max(n, max(star.support))
        targets = itertools.product(range(top + 1), repeat=N)
    shift = (1 - RationalPoly.x()) ** k
    kf = math.factorial(k)
    out = []
    for x in targets:
        x = tuple(x)
        lhs_poly = _leaf_target_poly(star, x).derivative(k)
        rhs_e = _tree_rhs_poly(cfg, m, n, k, leaves_equal(x))
        poly_ok = shift * lhs_poly == rhs_e * kf
        out.append(DerivativeCheck(x, lhs_poly(p), _fact_over(k, p) * rhs_e(p), poly_ok))
    return out


@dataclass(frozen=True)
class ZeroMassDerivativeCheck:
    identity: DerivativeCheck
    bound: Fraction

    @property
    def passed(self) -> bool:
        return self.identity.equal and abs(self.identity.lhs) <= self.bound


def lemma32_check(m: int, n: int, k: int, star: StarLaw, p) -> ZeroMassDerivativeCheck:
    """Tree form of d^k/dp^k P(X_n = 0) against the polynomial route, plus its bound.

    The bound is 2^k k!/(1-p)^k sum_{|A|=k} P(nabla^A 1_{X_n=0} != 0, X|A = 0).
    """
    p = Fraction(p)
    cfg = all_configs(m, n, star)
    pred = root_equals(0)
    rhs_e = _tree_rhs_poly(cfg, m, n, k, pred)
    lhs_poly = poly_iterate(poly_initial(m, star), n)[-1].mass(0).derivative(k)
    poly_ok = (1 - RationalPoly.x()) ** k * lhs_poly == rhs_e * math.factorial(k)
    prob = RationalPoly()
    for A in itertools.combinations(range(m**n), k):
        nz = _nabla_batch(cfg, A, pred, m) != 0
        prob = prob + cfg.weight_poly(nz & _zero_on(cfg, A))
    bound = 2**k * _fact_over(k, p) * prob(p)
    ident = DerivativeCheck((n, k), lhs_poly(p), _fact_over(k, p) * rhs_e(p), poly_ok)
    return ZeroMassDerivativeCheck(ident, bound)


# --- conditional structure of nonzero derivatives --------------------------------

@dataclass
class StructureReport:
    configurations: int = 0
    nonzero_cases: int = 0
    spine_violations: int = 0
    floor_violations: int = 0
    factorization_violations: int = 0
    decomposition_violations: int = 0

    @property
    def violations(self) -> int:
        return (self.spine_violations + self.floor_violations
                + self.factorization_violations + self.decomposition_violations)

    @property
    def passed(self) -> bool:
        return self.violations == 0


def _check_one(xs: np.ndarray, us: np.ndarray, A: tuple[int, ...], m: int, n: int,
               rep: StructureReport) -> None:
    rows, signs = _theta_leaves(xs, us, A)
    levels = fold(rows, m)
    roots = levels[-1][:, 0]
    nab = np.bincount(roots, weights=signs).astype(np.int64)
    rep.configurations += 1
    full = (1 << len(A)) - 1  # row of Theta^A
    plain = [lv[0] for lv in levels]  # row of B = empty, i.e. X itself
    sub = None
    if n >= 1:
        # nabla^{A_j} 1_{X(e_n^(j)) = x} from rows whose mask stays inside A_j
        block = m ** (n - 1)
        masks = np.arange(1 << len(A))
        sub = []
        for j in range(m):
            inside = sum(1 << t for t, v in enumerate(A) if v // block == j)
            sel = (masks & ~inside) == 0
            vals = levels[-2][sel, j]
            sub.append(np.bincount(vals, weights=signs[sel] * (1 if _parity(len(A), inside) else -1)))
        conv = sub[0]
        for s in sub[1:]:
            conv = np.convolve(conv, s)
    for i in range(len(nab)):
        if n >= 1:
            if i == 0:
                fac = conv[0] + (conv[1] if len(conv) > 1 else 0)
            else:
                fac = conv[i + 1] if i + 1 < len(conv) else 0
            if round(fac) != nab[i]:
                rep.factorization_violations += 1
        if nab[i] == 0:
            continue
        rep.nonzero_cases += 1
        if any(np.any(plain[lv] > n + i - lv) for lv in range(n + 1)):
            rep.spine_violations += 1
        top = int(roots[full])
        if top < max(i, 1):
            rep.floor_violations += 1
        fA = frozenset(A)
        L = l_set(m, n, fA)
        rhs = sum(int(plain[lv][j]) for lv, j in L) + int(xs[list(A)].sum()) - len(o_set(m, n, fA))
        if top != rhs:
            rep.decomposition_violations += 1


def _parity(k: int, inside: int) -> bool:
    # signs from _theta_leaves carry (-1)^{|A|-|B|}; restricting to A_j needs (-1)^{|A_j|-|B|}
    return (k - bin(inside).count("1")) % 2 == 0


def lemma33_34_check(m: int, n: int, star: StarLaw, p=Fraction(1, 2), trials: int | None = None,
                     seed: int | None = 0) -> StructureReport:
    """Spine bound, root floor, factorization and the O/L decomposition.

    With ``trials=None`` every configuration and every nonempty A is
    visited; otherwise ``trials`` random (configuration, A) pairs are drawn.
    """
    N = m**n
    if N > 16:
        raise BudgetExceeded("lemma33_34_check handles at most 16 leaves")
    rep = StructureReport()
    if trials is None:
        cfg = all_configs(m, n, star)
        subsets = [A for k in range(1, N + 1) for A in itertools.combinations(range(N), k)
                   if k <= NABLA_MAX]
        for xs, us in zip(cfg.x_star, cfg.u):
            for A in subsets:
                _check_one(xs, us, A, m, n, rep)
        return rep
    rng = np.random.default_rng(seed)
    support = np.array(star.support)
    probs = np.array([float(star.pmf()[k]) for k in star.support])
    for _ in range(trials):
        xs = rng.choice(support, size=N, p=probs / probs.sum())
        us = (rng.random(N) < float(p)).astype(np.int64)
        size = int(rng.integers(1, min(N, NABLA_MAX) + 1))
        A = tuple(sorted(rng.choice(N, size=size, replace=False).tolist()))
        _check_one(xs, us, A, m, n, rep)
    return rep


# --- counting spines -------------------------------------------------------------

@dataclass(frozen=True)
class SpineSum:
    value: Fraction
    bound: int
    side_entry_ok: bool

    @property
    def within_bound(self) -> bool:
        return self.value <= self.bound


def lemma35_sum(m: int, n: int, k: int) -> SpineSum:
    """sum over |A| = k of m^{-|O_{e_n,A}|}, its bound, and |L cap T_i| <= (m-1)|A|."""
    N = m**n
    if math.comb(N, k) > 200_000:
        raise BudgetExceeded("too many subsets to enumerate")
    total = Fraction(0)
    side_ok = True
    for A in itertools.combinations(range(N), k):
        fA = frozenset(A)
        total += Fraction(1, m ** len(o_set(m, n, fA)))
        per_level = Counter(lv for lv, _ in l_set(m, n, fA))
        side_ok &= all(c <= (m - 1) * k for c in per_level.values())
    return SpineSum(total, m ** (k**m) * n ** max(k - 1, 0), side_ok)


def smallest_subtree(m: int, n: int, A: Iterable[int]) -> frozenset:
    """Vertex set of the smallest subtree containing A and e_n, built from paths."""
    out = set()
    for v in A:
        out.update((i, v // m**i) for i in range(n + 1))
    if not out:
        out.add((n, 0))
    return frozenset(out)


# --- sanity properties -----------------------------------------------------------

def theta_monotone(a: LeafAssignment, B: Iterable[int], A: Iterable[int]) -> bool:
    """Theta^B X <= Theta^A X at every vertex when B is a subset of A."""
    B, A = set(B), set(A)
    if not B <= A:
        raise ValueError("B must be a subset of A")
    return all(np.all(x <= y) for x, y in zip(theta(a, B), theta(a, A)))


def tree_law(m: int, n: int, spec_star: StarLaw, p) -> Dist:
    """Exact law of X(e_n) by weighting every leaf configuration."""
    cfg = all_configs(m, n, spec_star)
    roots = fold(cfg.x_star * cfg.u, m)[-1][:, 0]
    p = Fraction(p)
    N = m**n
    hist: dict[int, Fraction] = {}
    for r, c, a in zip(roots.tolist(), cfg.coef, cfg.ones.tolist()):
        hist[r] = hist.get(r, 0) + c * p**a * (1 - p) ** (N - a)
    return Dist.from_masses(hist)


def distribution_consistency(m: int, n: int, star: StarLaw, p) -> bool:
    law = iterate(mix_initial(ModelSpec(m, star, Fraction(p))), m, n)[-1]
    return tree_law(m, n, star, p) == law
