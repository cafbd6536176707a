import math
from fractions import Fraction as F

import numpy as np
import pytest

from drsys.engine import (
    Dist, SupportOverflow, TailPolicy, convolve_power, dr_step, iterate, lower_window,
    sample_xn, total_variation,
)
from drsys.model import ModelSpec, StarLaw, mix_initial


def D(masses):
    return Dist.from_masses(masses)


@pytest.mark.parametrize("d,m,expected", [
    ({0: F(1)}, 2, {0: F(1)}),
    ({1: F(1)}, 2, {1: F(1)}),
    ({0: F(1, 2), 2: F(1, 2)}, 2, {0: F(1, 4), 1: F(1, 2), 3: F(1, 4)}),
])
def test_dr_step(d, m, expected):
    assert dr_step(D(d), m).as_dict() == expected


def test_iterate_deterministic_orbit():
    laws = iterate(Dist.delta(2), 2, 2)
    assert laws[1].as_dict() == {3: 1}
    assert laws[2].as_dict() == {5: 1}


def test_iterate_zero_is_fixed():
    assert all(d.as_dict() == {0: 1} for d in iterate(Dist.delta(0), 3, 5))


def test_first_step_from_critical_mixture():
    d1 = iterate(mix_initial(ModelSpec(2, StarLaw.dirac(2), F(1, 5))), 2, 1)[1]
    assert d1.as_dict() == {0: F(16, 25), 1: F(8, 25), 3: F(1, 25)}


@pytest.mark.parametrize("d,m,expected", [
    ({0: F(1, 2), 1: F(1, 2)}, 2, {0: F(1, 4), 1: F(1, 2), 2: F(1, 4)}),
    ({1: F(1)}, 5, {5: F(1)}),
])
def test_convolve_power_exact(d, m, expected):
    assert convolve_power(D(d), m).as_dict() == expected


def test_convolve_power_float():
    out = convolve_power(D({0: 0.9, 2: 0.1}), 3)
    for k, v in {0: 0.729, 2: 0.243, 4: 0.027, 6: 0.001}.items():
        assert out[k] == pytest.approx(v, abs=1e-12)


def test_float_cap_lumps_tail():
    d = iterate(D({0: 0.5, 2: 0.5}), 2, 6, cap=20, policy=TailPolicy.LUMP_AT_CAP)[-1]
    assert d.support_max <= 20
    assert float(d.total()) == pytest.approx(1.0)
    assert float(d.lumped_tail) > 0


def test_float_cap_reject_raises():
    with pytest.raises(SupportOverflow):
        iterate(D({0: 0.5, 2: 0.5}), 2, 6, cap=20, policy=TailPolicy.REJECT)


def test_lower_window_matches_full_recursion():
    d0 = D({0: F(1, 2), 1: F(1, 4), 3: F(1, 4)})
    full = iterate(d0, 2, 5)
    win = lower_window(d0, 2, 5, 2)
    for n in range(6):
        assert list(win[n][:3]) == [full[n][k] for k in range(3)]


def test_sampler_p_zero():
    hist = sample_xn(ModelSpec(2, StarLaw.dirac(2), F(0)), 3, rng_seed=5, n_samples=1000)
    assert dict(hist) == {0: 1000}


def test_sampler_p_one():
    hist = sample_xn(ModelSpec(2, StarLaw.dirac(2), F(1)), 4, rng_seed=3, n_samples=500)
    assert dict(hist) == {17: 500}


def test_sampler_first_generation_zero_mass():
    n = 10**5
    hist = sample_xn(ModelSpec(2, StarLaw.dirac(2), F(1, 5)), 1, rng_seed=1, n_samples=n)
    est = hist.get(0, 0) / n
    assert abs(est - 16 / 25) <= 3 * math.sqrt(0.64 * 0.36 / n)


def test_sampler_is_reproducible():
    spec = ModelSpec(2, StarLaw.dirac(2), F(1, 5))
    a = sample_xn(spec, 3, rng_seed=9, n_samples=2000)
    b = sample_xn(spec, 3, rng_seed=9, n_samples=2000)
    assert dict(a) == dict(b)


def test_total_variation_zero_for_exact_histogram():
    d = D({0: F(1, 4), 1: F(3, 4)})
    assert total_variation({0: 25, 1: 75}, d) == pytest.approx(0.0)


def test_exact_and_float_agree():
    d0 = mix_initial(ModelSpec(2, StarLaw.dirac(2), F(3, 10)))
    ex = iterate(d0, 2, 6)[-1]
    fl = iterate(d0.to_float(), 2, 6)[-1]
    assert np.allclose([float(v) for v in ex.masses], fl.masses[: len(ex.masses)], atol=1e-12)
