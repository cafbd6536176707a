"""Acceptance criteria, one test each, with the pinned tolerances and time limits."""
import math
import random
from fractions import Fraction as F

from drsys.engine import iterate, sample_xn, total_variation
from drsys.mgfdelta import (
    Status, TruncatedLaw, delta_sweep, dual_formula_check, one_step_delta_identity_check,
    s_of_delta,
)
from drsys.model import ModelSpec, StarLaw, critical_p, mix_initial
from drsys.observables import (
    free_energy_brackets, hoeffding_tail_check, mean_identity_residuals,
    sign_preservation_check, zero_mass_decay_profile,
)
from drsys.polymode import derivative_table, poly_initial, poly_iterate
from drsys.tree import lemma31_check, lemma33_34_check, lemma35_sum

DIRAC2 = StarLaw.dirac(2)
HALVES = StarLaw.finite({1: F(1, 2), 2: F(1, 2)})


def test_criterion_01_mean_identity(criterion):
    c = criterion(1, "exact mean identity", 1.0)
    bad = []
    for m in (2, 3):
        for star in (DIRAC2, HALVES):
            for p in (F(1, 10), F(1, 5), F(1, 2)):
                laws = iterate(mix_initial(ModelSpec(m, star, p)), m, 7)
                if any(r != 0 for r in mean_identity_residuals(laws, m)):
                    bad.append((m, star.kind, p))
    c.verdict(not bad, f"12 systems, n <= 6, nonzero residuals in {bad}")


def test_criterion_02_bracket_identities(criterion):
    c = criterion(2, "bracket identities", 5.0)
    ok = True
    for p in (F(1, 10), F(1, 5), F(1, 2)):
        bs = free_energy_brackets(ModelSpec(2, DIRAC2, p), 12)
        ok &= all(b.U - b.L == F(1, 2**b.N) for b in bs)
        ok &= all(a.S == b.L for a, b in zip(bs, bs[1:]))
        ok &= all(a.L <= b.L and a.U >= b.U for a, b in zip(bs, bs[1:]))
    c.verdict(ok, "width, S_{N-1} = L_N and monotonicity for N <= 12 at p in {1/10, 1/5, 1/2}")


def test_criterion_03_criticality(criterion):
    c = criterion(3, "critical point and sign preservation", 5.0)
    pc = critical_p(2, DIRAC2)
    signs = {}
    for p, want in ((pc - F(1, 100), 1), (pc, 0), (pc + F(1, 100), -1)):
        rep = sign_preservation_check(ModelSpec(2, DIRAC2, p), 4)
        signs[str(p)] = (rep.constant and rep.sign == want, rep.signs)
    ok = pc == F(1, 5) and all(v[0] for v in signs.values())
    c.verdict(ok, f"p_c = {pc}, signs {({k: v[1] for k, v in signs.items()})}")


def test_criterion_04_phase_desk_check(criterion):
    c = criterion(4, "subcritical decay and supercritical growth", 10.0)
    low = free_energy_brackets(ModelSpec(2, DIRAC2, F(3, 20)), 12)[-1]
    high = free_energy_brackets(ModelSpec(2, DIRAC2, F(1, 4)), 12)
    e12, e6 = high[12].mean, high[6].mean
    ok = low.mean < F(1, 100) and low.U < F(1, 100) and e12 > 10 * e6
    c.verdict(ok, f"p=0.15: E(X_12)={float(low.mean):.3g}, U_12={float(low.U):.3g}; "
                  f"p=0.25: E(X_12)/E(X_6)={float(e12 / e6):.3g}")


def test_criterion_05_symbolic_consistency(criterion):
    c = criterion(5, "symbolic law consistency", 30.0)
    pds = poly_iterate(poly_initial(2, DIRAC2), 6)
    sums = all(pd.mass_sum_is_one() for pd in pds)
    rng = random.Random(5)
    grid = set()
    while len(grid) < 20:
        grid.add(F(rng.randint(0, 60), 60))
    mismatches = 0
    for p in sorted(grid):
        laws = iterate(mix_initial(ModelSpec(2, DIRAC2, p)), 2, 6)
        mismatches += sum(pd.evaluate(p) != law for pd, law in zip(pds, laws))
    c.verdict(sums and mismatches == 0, f"mass sums identically 1: {sums}; "
                                        f"{mismatches} mismatches over 20 p values, n <= 6")


def test_criterion_06_tree_derivative_identity(criterion):
    c = criterion(6, "tree derivative identity", 60.0)
    total, bad = 0, []
    for n in (0, 1, 2):
        for k in (1, 2):
            checks = lemma31_check(2, n, k, DIRAC2, F(1, 5))
            total += len(checks)
            bad += [(n, k, ch.target) for ch in checks if not ch.equal]
    c.verdict(not bad, f"{total} (n, k, target) cases, mismatches {bad[:3]}")


def test_criterion_07_derivative_structure(criterion):
    c = criterion(7, "structure of nonzero tree derivatives", 60.0)
    ex = lemma33_34_check(2, 2, DIRAC2)
    rnd = lemma33_34_check(2, 3, DIRAC2, trials=10_000, seed=0)
    c.verdict(ex.passed and rnd.passed,
              f"exhaustive n=2: {ex.configurations} cases, {ex.violations} violations; "
              f"random n=3: {rnd.configurations} cases, {rnd.violations} violations")


def test_criterion_08_spine_sum(criterion):
    c = criterion(8, "spine sum and its bound", 10.0)
    unit = [lemma35_sum(2, n, 1).value for n in range(0, 5)]
    over = [(n, k) for n in range(0, 5) for k in range(0, 4)
            if not lemma35_sum(2, n, k).within_bound]
    c.verdict(all(v == 1 for v in unit) and not over,
              f"k=1 sums {[str(v) for v in unit]}, bound exceeded at {over}")


def test_criterion_09_delta_machinery(criterion):
    c = criterion(9, "Delta identities and conditional inequalities", 60.0)
    rng = random.Random(9)
    bad = 0
    for trial in range(20):
        m = 2 + trial % 2
        w = [rng.randint(0, 6) for _ in range(rng.randint(1, 6))]
        w[0] += 1
        law = TruncatedLaw.from_masses([F(v, sum(w)) for v in w])
        for s in (F(3, 2), s_of_delta(m, F(1, 64))):
            bad += not dual_formula_check(law, s, m).equal
            bad += not one_step_delta_identity_check(law, s, m).equal
    pc = critical_p(2, DIRAC2)
    counts = {st: 0 for st in Status}
    for p in (pc - F(1, 50), pc, pc + F(1, 50)):
        for M in (6, 8):
            for r in delta_sweep(ModelSpec(2, DIRAC2, p), M):
                for st in (r.cs, r.lower_bound, r.recursion):
                    counts[st] += 1
    ok = bad == 0 and counts[Status.FAIL] == 0 and counts[Status.PASS] > 0
    c.verdict(ok, f"{bad} identity failures on 20 laws; sweep {counts[Status.PASS]} pass, "
                  f"{counts[Status.FAIL]} fail, {counts[Status.NOT_APPLICABLE]} not applicable")


def test_criterion_10_hoeffding_tail(criterion):
    c = criterion(10, "Hoeffding tail bound", 10.0)
    c1 = DIRAC2.c1
    rep = hoeffding_tail_check(ModelSpec(2, DIRAC2, 1 - F(c1) / 4), 6, 1, n_samples=100_000, seed=0)
    ok = rep.mc_estimate <= rep.bound + 3 * rep.stderr
    c.verdict(ok, f"estimate {rep.mc_estimate:.3g} +- {rep.stderr:.2g} vs bound {rep.bound:.4g}")


def test_criterion_11_zero_mass_decay(criterion):
    c = criterion(11, "double-exponential decay of P(X_n=0)", 120.0)
    prof = zero_mass_decay_profile(ModelSpec(2, DIRAC2, 0.4), 14, cap=10**6)
    inc = prof.increments[10:15]
    ok = all(abs(v - math.log(2)) <= 0.2 for v in inc)
    c.verdict(ok, f"increments n=10..14 {[round(v, 3) for v in inc]} vs log 2 = {math.log(2):.3f}")


def test_criterion_12_monte_carlo(criterion):
    c = criterion(12, "Monte Carlo against exact law", 30.0)
    spec = ModelSpec(2, DIRAC2, F(1, 5))
    law = iterate(mix_initial(spec), 2, 5)[-1]
    hist = sample_xn(spec, 5, rng_seed=0, n_samples=100_000)
    tv = total_variation(hist, law)
    c.verdict(tv <= 0.02, f"TV = {tv:.4g} at n=5 with 1e5 samples")


def test_criterion_13_series_terms_decrease(criterion):
    c = criterion(13, "derivative series terms decrease in n", 300.0)
    rows = derivative_table(2, DIRAC2, 8, 3, F(1, 5))
    term = {(r["n"], r["k"]): abs(r["series_term"]) for r in rows}
    broken = [(k, n) for k in range(4) for n in range(4, 8) if not term[(n + 1, k)] < term[(n, k)]]
    detail = "; ".join(
        f"k={k}: " + ", ".join(f"{float(term[(n, k)]):.4g}" for n in range(4, 9)) for k in range(4))
    c.verdict(not broken, f"non-decreasing steps (k, n) {broken}; terms n=4..8 {detail}")
