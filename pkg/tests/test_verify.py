import json
from fractions import Fraction as F

import pytest

from drsys.experiments import critical_law, default_lambda, mixture_mean_derivatives, p_grid
from drsys.model import ModelSpec, SpecError, StarLaw, criticality_value
from drsys.verify import GOLDEN, compute_golden, run_suites


def test_golden_table_reproduces():
    assert compute_golden() == GOLDEN


@pytest.mark.parametrize("suite", ["mean", "brackets", "sign", "golden"])
def test_quick_suites_pass(suite):
    res = run_suites([suite])
    assert res and all(r.suite == suite and r.status == "pass" for r in res)


def test_suites_skip_instead_of_passing_vacuously():
    spec = ModelSpec(2, StarLaw.dirac(2), 0.2)
    res = run_suites(["brackets", "montecarlo"], spec)
    assert {r.status for r in res} == {"not_applicable"}


def test_unknown_suite():
    with pytest.raises(KeyError):
        run_suites(["bogus"])


def test_corrupted_golden_file(tmp_path):
    path = tmp_path / "g.json"
    bad = dict(GOLDEN, **{"E(X_3)[p=1/5]": "1/2"})
    path.write_text(json.dumps(bad))
    res = run_suites(["golden"], golden=path)
    assert [r.name for r in res if r.status == "fail"] == ["E(X_3)[p=1/5]"]


def test_default_second_law_is_critical():
    lam = default_lambda(2)
    assert sum(lam.values()) == 1
    assert criticality_value(lam, 2) == 0


def test_critical_law_solve():
    law = critical_law(2, {1: F(1, 2)}, solve_for=(0, 3))
    assert sum(law.values()) == 1 and criticality_value(law, 2) == 0


def test_mixture_rejects_noncritical():
    with pytest.raises(SpecError):
        mixture_mean_derivatives(2, {0: F(1, 2), 2: F(1, 2)}, default_lambda(2), 1, [F(0)])


def test_mixture_generation_zero_is_linear():
    mu = {0: F(4, 5), 2: F(1, 5)}
    rows = mixture_mean_derivatives(2, mu, default_lambda(2), 0, [F(0), F(1, 2)])
    assert {r["dmean_dp"] for r in rows} == {F(1, 2) + F(3, 34) - F(2, 5)}


def test_p_grid():
    assert p_grid("0:1:5") == [F(0), F(1, 4), F(1, 2), F(3, 4), F(1)]
    with pytest.raises(ValueError):
        p_grid("0:1:0")
