from fractions import Fraction as F

import pytest

from drsys.model import (
    ModelSpec, Phase, SpecError, StarLaw, classify, critical_p, dump_spec, format_number,
    load_spec, mix_initial, parse_number,
)


@pytest.mark.parametrize("text,value", [("1/5", F(1, 5)), ("3", F(3)), ("0.15", F(3, 20))])
def test_parse_number_strings_are_exact(text, value):
    assert parse_number(text) == value
    assert isinstance(parse_number(text), F)


def test_parse_number_keeps_floats():
    assert isinstance(parse_number(0.25), float)


def test_format_number():
    assert format_number(F(0)) == "0"
    assert format_number(F(1, 5)) == "1/5"


@pytest.mark.parametrize("p,expected", [
    (F(0), {0: F(1)}),
    (F(1), {2: F(1)}),
    (F(1, 5), {0: F(4, 5), 2: F(1, 5)}),
])
def test_mix_initial(p, expected):
    assert mix_initial(ModelSpec(2, StarLaw.dirac(2), p)).as_dict() == expected


@pytest.mark.parametrize("m,star,pc", [
    (2, StarLaw.dirac(2), F(1, 5)),
    (3, StarLaw.dirac(1), F(1, 4)),
])
def test_critical_p(m, star, pc):
    assert critical_p(m, star) == pc


def test_critical_p_divergent_star_is_zero():
    star = StarLaw.power_geometric(1.0, 50, 2)
    assert star.divergent
    assert critical_p(2, star) == 0


@pytest.mark.parametrize("p,phase", [
    (F(1, 5), Phase.CRITICAL), (F(0), Phase.SUBCRITICAL), (F(1, 2), Phase.SUPERCRITICAL),
])
def test_classify(p, phase):
    assert classify(ModelSpec(2, StarLaw.dirac(2), p)) is phase


@pytest.mark.parametrize("bad", [
    {"m": 1, "star": {"kind": "dirac", "k0": 2}, "p": "1/2"},
    {"m": 2, "star": {"kind": "dirac", "k0": 2}, "p": "3/2"},
    {"m": 2, "star": {"kind": "finite", "masses": {"1": "1/2", "2": "1/3"}}, "p": "1/2"},
    {"m": 2, "star": {"kind": "finite", "masses": {"0": "1"}}, "p": "1/2"},
])
def test_invalid_specs_rejected(bad):
    with pytest.raises(SpecError):
        ModelSpec.from_json(bad)


def test_spec_json_round_trip(tmp_path):
    spec = ModelSpec(3, StarLaw.finite({1: F(1, 2), 2: F(1, 2)}), F(1, 10))
    path = tmp_path / "spec.json"
    dump_spec(spec, path)
    again = load_spec(path)
    assert again.m == 3 and again.p == F(1, 10)
    assert again.star.pmf() == spec.star.pmf()


def test_c1():
    assert StarLaw.dirac(2).c1 == 1
    assert StarLaw.finite({1: F(3, 4), 2: F(1, 4)}).c1 == F(1, 4)
