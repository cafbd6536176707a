import math
from fractions import Fraction as F

import pytest

from drsys.engine import Dist, iterate
from drsys.model import ModelSpec, Phase, StarLaw, mix_initial
from drsys.observables import (
    PreconditionError, criticality_functional, free_energy_bracket, free_energy_brackets,
    hoeffding_tail_check, hoeffding_threshold, mean_identity_residuals, moments,
    sign_preservation_check, zero_mass_decay_profile,
)

DIRAC2 = StarLaw.dirac(2)


def spec(p, m=2, star=DIRAC2):
    return ModelSpec(m, star, F(p))


@pytest.mark.parametrize("masses,s,expected", [
    ({0: F(1)}, 2, (0, 1, 0)),
    ({0: F(4, 5), 2: F(1, 5)}, 2, (F(2, 5), F(8, 5), F(8, 5))),
    ({0: F(16, 25), 1: F(8, 25), 3: F(1, 25)}, 2, (F(11, 25), F(8, 5), F(8, 5))),
])
def test_moments(masses, s, expected):
    mo = moments(Dist.from_masses(masses), F(s))
    assert (mo.mean, mo.gf, mo.xgf) == expected
    assert not mo.divergent


def test_criticality_functional_phase():
    g = criticality_functional(mix_initial(spec(F(1, 5))), 2)
    assert g.value == 0 and g.sign == 0 and g.phase is Phase.CRITICAL


def test_brackets_deterministic_orbit():
    b = free_energy_bracket(spec(1), 5)
    assert b.L == 1 and b.U == 1 + F(1, 32)


def test_brackets_trivial_orbit():
    b = free_energy_bracket(spec(0), 3)
    assert b.L == F(-1, 8) and b.U == 0


@pytest.mark.parametrize("m", [2, 3])
@pytest.mark.parametrize("p", [F(1, 10), F(1, 3)])
def test_bracket_width_and_series(m, p):
    bs = free_energy_brackets(spec(p, m=m), 8)
    for b in bs:
        assert b.U - b.L == F(1, m**b.N * (m - 1))
    for a, b in zip(bs, bs[1:]):
        assert a.S == b.L


def test_float_brackets_track_exact():
    ex = free_energy_bracket(spec(F(3, 10)), 10)
    fl = free_energy_bracket(spec(F(3, 10)), 10, float_mode=True)
    assert float(ex.L) == pytest.approx(fl.L, rel=1e-9)


@pytest.mark.parametrize("delta_p,sign", [(F(-1, 100), 1), (F(0), 0), (F(1, 100), -1)])
def test_sign_preservation(delta_p, sign):
    rep = sign_preservation_check(spec(F(1, 5) + delta_p), 4)
    assert rep.constant and rep.sign == sign


def test_sign_preservation_needs_exact():
    with pytest.raises(PreconditionError):
        sign_preservation_check(ModelSpec(2, DIRAC2, 0.2), 3)


def test_mean_identity_small():
    laws = iterate(mix_initial(spec(F(1, 2), m=3)), 3, 4)
    assert all(r == 0 for r in mean_identity_residuals(laws, 3))


def test_hoeffding_deterministic():
    rep = hoeffding_tail_check(spec(1), 6, 1, n_samples=1000)
    assert rep.mc_estimate == 0 and rep.passed


def test_hoeffding_bound_value():
    rep = hoeffding_tail_check(spec(F(3, 4)), 6, 1, n_samples=20_000, seed=2)
    assert rep.bound == pytest.approx(math.exp(-63 / 32))
    assert rep.passed
    assert float(rep.exact) <= rep.bound


@pytest.mark.parametrize("args", [
    (F(3, 4), 6, 64),    # k = m^n leaves nothing to sum
    (F(1, 2), 6, 1),     # p below 1 - c1/4
    (F(3, 4), 1, 1),     # n below the threshold
])
def test_hoeffding_preconditions(args):
    p, n, k = args
    with pytest.raises(PreconditionError):
        hoeffding_tail_check(spec(p), n, k, n_samples=10)


def test_hoeffding_threshold_dirac():
    assert hoeffding_threshold(2, 1, 1) == math.floor(math.log(5) / math.log(2)) + 1


def test_decay_profile_supercritical():
    prof = zero_mass_decay_profile(ModelSpec(2, DIRAC2, 0.4), 12)
    tail = prof.increments[9:13]
    assert all(abs(v - math.log(2)) < 0.2 for v in tail)
