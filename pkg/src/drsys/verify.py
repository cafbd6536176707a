"""Named check suites with pass / fail / not-applicable outcomes.

Each suite returns :class:`CheckResult` rows.  Not-applicable rows record
a check whose hypotheses do not hold for the chosen system; they never
count as failures.
"""
from __future__ import annotations

import json
import math
import random
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable

from .engine import iterate, sample_xn, total_variation
from .mgfdelta import (
    Status, TruncatedLaw, delta_sweep, dual_formula_check, gf_step_check,
    one_mass_check, one_step_delta_identity_check, s_of_delta,
)
from .model import ModelSpec, StarLaw, critical_p, mix_initial
from .observables import (
    PreconditionError, free_energy_brackets, hoeffding_tail_check, mean_identity_residuals,
    sign_preservation_check, zero_mass_decay_profile,
)
from .polymode import BudgetExceeded, dkdp_p0, poly_initial, poly_iterate
from .tree import (
    distribution_consistency, lemma31_check, lemma32_check, lemma33_34_check, lemma35_sum,
)

PASS, FAIL, NA = "pass", "fail", "not_applicable"
DEFAULT_SPEC = ModelSpec(2, StarLaw.dirac(2), Fraction(1, 5))


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    status: str
    detail: str = ""
    seconds: float = 0.0

    def as_dict(self) -> dict:
        return {"suite": self.suite, "name": self.name, "status": self.status,
                "detail": self.detail, "seconds": round(self.seconds, 3)}


def _status(ok: bool) -> str:
    return PASS if ok else FAIL


# --- suites ----------------------------------------------------------------------

def suite_mean(spec: ModelSpec, **_) -> Iterable[CheckResult]:
    if not spec.star.exact:
        yield CheckResult("mean", "mean_identity", NA, "needs a finite star law")
        return
    for p in (Fraction(1, 10), Fraction(1, 5), Fraction(1, 2)):
        laws = iterate(mix_initial(spec.with_p(p)), spec.m, 6)
        res = mean_identity_residuals(laws, spec.m)
        yield CheckResult("mean", f"mean_identity[p={p}]", _status(all(r == 0 for r in res)))


def suite_brackets(spec: ModelSpec, N: int = 12, **_) -> Iterable[CheckResult]:
    if not spec.exact:
        yield CheckResult("brackets", "bracket_identities", NA, "exact mode only")
        return
    bs = free_energy_brackets(spec, N)
    m = spec.m
    width = all(b.U - b.L == Fraction(1, m**b.N * (m - 1)) for b in bs)
    series = all(bs[i - 1].S == bs[i].L for i in range(1, len(bs)))
    mono = all(a.L <= b.L and a.U >= b.U for a, b in zip(bs, bs[1:]))
    yield CheckResult("brackets", "width", _status(width))
    yield CheckResult("brackets", "series_equals_lower", _status(series))
    yield CheckResult("brackets", "monotone", _status(mono))


def suite_sign(spec: ModelSpec, **_) -> Iterable[CheckResult]:
    if not spec.star.exact:
        yield CheckResult("sign", "sign_preservation", NA, "needs a finite star law")
        return
    pc = critical_p(spec.m, spec.star)
    for label, p, want in (("below", pc - Fraction(1, 100), 1), ("at", pc, 0),
                           ("above", pc + Fraction(1, 100), -1)):
        if not 0 <= p <= 1:
            yield CheckResult("sign", f"sign[{label}]", NA, f"p={p} outside [0,1]")
            continue
        rep = sign_preservation_check(spec.with_p(p), 4)
        yield CheckResult("sign", f"sign[{label} p_c]", _status(rep.constant and rep.sign == want),
                          f"signs={rep.signs}")


def suite_polymode(spec: ModelSpec, n: int = 6, **_) -> Iterable[CheckResult]:
    if not spec.star.exact:
        yield CheckResult("polymode", "consistency", NA, "needs a finite star law")
        return
    m = spec.m
    try:
        pds = poly_iterate(poly_initial(m, spec.star), n)
    except BudgetExceeded as exc:
        yield CheckResult("polymode", "consistency", NA, str(exc))
        return
    yield CheckResult("polymode", "mass_sums_to_one", _status(all(pd.mass_sum_is_one() for pd in pds)))
    rng = random.Random(0)
    grid = sorted({Fraction(rng.randint(1, 97), 97) for _ in range(40)})[:20]
    ok = True
    for p in grid:
        laws = iterate(mix_initial(spec.with_p(p)), m, n)
        ok &= all(pd.evaluate(p) == law for pd, law in zip(pds, laws))
    yield CheckResult("polymode", "evaluate_commutes_with_step", _status(ok), f"{len(grid)} p values")


def suite_tree(spec: ModelSpec, n: int | None = None, k: int | None = None, **_) -> Iterable[CheckResult]:
    if not spec.star.exact:
        yield CheckResult("tree", "tree", NA, "needs a finite star law")
        return
    m, star = spec.m, spec.star
    p = spec.p if isinstance(spec.p, Fraction) and spec.p < 1 else Fraction(1, 5)
    ns = [n] if n is not None else [q for q in (0, 1, 2) if m**q <= 4]
    ks = [k] if k is not None else [1, 2]
    for nn in ns:
        for kk in ks:
            try:
                checks = lemma31_check(m, nn, kk, star, p)
            except BudgetExceeded as exc:
                yield CheckResult("tree", f"lemma31[n={nn},k={kk}]", NA, str(exc))
                continue
            bad = [c.target for c in checks if not c.equal]
            yield CheckResult("tree", f"lemma31[n={nn},k={kk}]", _status(not bad),
                              f"{len(checks)} targets" + (f", mismatches {bad[:3]}" if bad else ""))
            if kk >= 1 and nn >= 1:
                r = lemma32_check(m, nn, kk, star, p)
                yield CheckResult("tree", f"lemma32[n={nn},k={kk}]", _status(r.passed))
    n_ex = n if n is not None and m**n <= 4 else (2 if m == 2 else 1)
    rep = lemma33_34_check(m, n_ex, star)
    yield CheckResult("tree", f"lemma33_34_exhaustive[n={n_ex}]", _status(rep.passed),
                      f"{rep.nonzero_cases} nonzero cases, {rep.violations} violations")
    if m == 2:
        rep = lemma33_34_check(m, 3, star, trials=10_000, seed=0)
        yield CheckResult("tree", "lemma33_34_random[n=3]", _status(rep.passed),
                          f"{rep.nonzero_cases} nonzero cases, {rep.violations} violations")
    ok = True
    for nn in range(1, 5 if m == 2 else 3):
        for kk in range(0, 4):
            s = lemma35_sum(m, nn, kk)
            ok &= s.within_bound and s.side_entry_ok and (kk != 1 or s.value == 1)
    yield CheckResult("tree", "lemma35", _status(ok))
    yield CheckResult("tree", "distribution_consistency",
                      _status(distribution_consistency(m, min(2, n_ex), star, p)))


def suite_delta(spec: ModelSpec, M: int | None = None, **_) -> Iterable[CheckResult]:
    rng = random.Random(1)
    ok_dual = ok_step = ok_gf = True
    for trial in range(20):
        m = 2 + trial % 2
        size = rng.randint(1, 5)
        w = [rng.randint(0, 6) for _ in range(size)]
        w[0] += 1
        law = TruncatedLaw.from_masses([Fraction(x, sum(w)) for x in w])
        for s in (Fraction(3, 2), s_of_delta(m, Fraction(1, 64))):
            ok_dual &= dual_formula_check(law, s, m).equal
            ok_step &= one_step_delta_identity_check(law, s, m).equal
            ok_gf &= gf_step_check(law, s, m)
    yield CheckResult("delta", "dual_formula", _status(ok_dual), "20 random laws")
    yield CheckResult("delta", "one_step_identity", _status(ok_step), "20 random laws")
    yield CheckResult("delta", "generating_function_step", _status(ok_gf))
    if not spec.exact:
        yield CheckResult("delta", "lemma45_sweep", NA, "exact mode only")
        return
    pc = critical_p(spec.m, spec.star)
    counts = {Status.PASS: 0, Status.FAIL: 0, Status.NOT_APPLICABLE: 0}
    for p in (pc, pc - Fraction(1, 50), pc + Fraction(1, 50)):
        if not 0 <= p <= 1:
            continue
        for MM in ([M] if M else [6, 8]):
            for r in delta_sweep(spec.with_p(p), MM):
                for st in (r.cs, r.lower_bound, r.recursion):
                    counts[st] += 1
    status = FAIL if counts[Status.FAIL] else (PASS if counts[Status.PASS] else NA)
    yield CheckResult("delta", "lemma45_sweep", status,
                      f"{counts[Status.PASS]} pass, {counts[Status.FAIL]} fail, "
                      f"{counts[Status.NOT_APPLICABLE]} not applicable")
    if spec.m == 2 and spec.star.c1 > 0:
        rep = one_mass_check(spec.star)
        yield CheckResult("delta", "one_mass_bound", _status(rep.passed),
                          f"n2={rep.n2}, max P(X_n=1)={rep.worst:.6g}")


def suite_hoeffding(spec: ModelSpec, samples: int = 100_000, seed: int = 0, **_) -> Iterable[CheckResult]:
    c1 = spec.star.c1
    if c1 <= 0:
        yield CheckResult("hoeffding", "tail_bound", NA, "c1 = 0")
        return
    try:
        rep = hoeffding_tail_check(spec.with_p(1 - Fraction(c1) / 4), 6, 1, samples, seed)
    except PreconditionError as exc:
        yield CheckResult("hoeffding", "tail_bound", NA, str(exc))
        return
    yield CheckResult("hoeffding", "tail_bound", _status(rep.passed),
                      f"estimate={rep.mc_estimate:.3g}+-{rep.stderr:.2g}, bound={rep.bound:.4g}")


def suite_montecarlo(spec: ModelSpec, samples: int = 100_000, seed: int = 0, **_) -> Iterable[CheckResult]:
    if not spec.exact:
        yield CheckResult("montecarlo", "tv_distance", NA, "exact mode only")
        return
    n = 5
    law = iterate(mix_initial(spec), spec.m, n)[-1]
    hist = sample_xn(spec, n, rng_seed=seed, n_samples=samples)
    tv = total_variation(hist, law)
    yield CheckResult("montecarlo", "tv_distance", _status(tv <= 0.02), f"TV={tv:.4g}")


def suite_decay(spec: ModelSpec, **_) -> Iterable[CheckResult]:
    if spec.m != 2 or spec.star.kind != "dirac" or spec.star.support != [2]:
        yield CheckResult("decay", "zero_mass_decay", NA, "calibrated for m=2, dirac(2)")
        return
    prof = zero_mass_decay_profile(spec.with_p(0.4), 14)
    inc = prof.increments[10:15]
    ok = all(abs(x - math.log(2)) <= 0.2 for x in inc)
    yield CheckResult("decay", "zero_mass_decay", _status(ok), f"increments={[round(x, 3) for x in inc]}")


# Frozen values, each obtained by a route independent of the code it guards
# (brute-force tree enumeration or a naive power-basis polynomial recursion).
GOLDEN = {
    "critical_p[m=2,dirac2]": "1/5",
    "P(X_3=0)[p=1/5]": "65536/78125",
    "E(X_3)[p=1/5]": "97769/390625",
    "E(X_2)[p=1/2]": "25/16",
    "dP(X_4=0)/dp[p=1/5]": "-11475615744/6103515625",
    "d2P(X_4=0)/dp2[p=1/5]": "-3254779904/244140625",
    "lemma35_sum[m=2,n=4,k=3]": "3",
}

_GOLDEN_COMPUTE: dict[str, Callable[[], Fraction]] = {
    "critical_p[m=2,dirac2]": lambda: critical_p(2, StarLaw.dirac(2)),
    "P(X_3=0)[p=1/5]": lambda: iterate(mix_initial(DEFAULT_SPEC), 2, 3)[-1][0],
    "E(X_3)[p=1/5]": lambda: iterate(mix_initial(DEFAULT_SPEC), 2, 3)[-1].mean(),
    "E(X_2)[p=1/2]": lambda: iterate(mix_initial(DEFAULT_SPEC.with_p(Fraction(1, 2))), 2, 2)[-1].mean(),
    "dP(X_4=0)/dp[p=1/5]": lambda: dkdp_p0(
        poly_iterate(poly_initial(2, StarLaw.dirac(2)), 4)[-1], 1, Fraction(1, 5)),
    "d2P(X_4=0)/dp2[p=1/5]": lambda: dkdp_p0(
        poly_iterate(poly_initial(2, StarLaw.dirac(2)), 4)[-1], 2, Fraction(1, 5)),
    "lemma35_sum[m=2,n=4,k=3]": lambda: lemma35_sum(2, 4, 3).value,
}


def compute_golden() -> dict[str, str]:
    from .io import fmt_exact

    return {name: fmt_exact(fn()) for name, fn in _GOLDEN_COMPUTE.items()}


def suite_golden(spec: ModelSpec, golden: str | Path | None = None, **_) -> Iterable[CheckResult]:
    expected = dict(GOLDEN)
    if golden is not None:
        with open(golden) as fh:
            expected = json.load(fh)
    actual = compute_golden()
    for name, want in expected.items():
        if name not in actual:
            yield CheckResult("golden", name, FAIL, "unknown golden quantity")
            continue
        got = actual[name]
        yield CheckResult("golden", name, _status(got == str(want)),
                          "" if got == str(want) else f"expected {want}, got {got}")


SUITES: dict[str, Callable[..., Iterable[CheckResult]]] = {
    "mean": suite_mean,
    "brackets": suite_brackets,
    "sign": suite_sign,
    "polymode": suite_polymode,
    "tree": suite_tree,
    "delta": suite_delta,
    "hoeffding": suite_hoeffding,
    "montecarlo": suite_montecarlo,
    "decay": suite_decay,
    "golden": suite_golden,
}


def run_suites(names: Iterable[str] | None = None, spec: ModelSpec | None = None, **opts) -> list[CheckResult]:
    spec = spec or DEFAULT_SPEC
    names = list(names) if names else list(SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise KeyError(f"unknown suite(s): {', '.join(unknown)}; choose from {', '.join(SUITES)}")
    out = []
    for name in names:
        for res in _timed(SUITES[name], spec, opts):
            out.append(res)
    return out


def _timed(fn, spec, opts) -> Iterable[CheckResult]:
    t0 = time.perf_counter()
    for res in fn(spec, **opts):
        now = time.perf_counter()
        yield CheckResult(res.suite, res.name, res.status, res.detail, now - t0)
        t0 = now


def any_failed(results: Iterable[CheckResult]) -> bool:
    return any(r.status == FAIL for r in results)
