from fractions import Fraction as F

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.pipeline import make_pipeline

from drsys.estimators import FreeEnergyBracketTransformer, PhaseClassifier, ZeroMassDerivative

P = np.array([[0.1], [0.2], [0.5]])


def test_clone_and_params():
    est = FreeEnergyBracketTransformer(m=3, star={"kind": "dirac", "k0": 1}, N=4)
    again = clone(est)
    assert again.get_params() == est.get_params()


def test_bracket_transformer_width():
    out = FreeEnergyBracketTransformer(N=6).fit(P).transform(P)
    assert out.shape == (3, 3)
    assert np.allclose(out[:, 1] - out[:, 0], 2.0**-6)


def test_phase_classifier():
    clf = PhaseClassifier().fit(P)
    assert clf.critical_p_ == F(1, 5)
    assert clf.predict(P).tolist() == ["subcritical", "critical", "supercritical"]


def test_zero_mass_derivative_matches_frozen_value():
    out = ZeroMassDerivative(n=4, k=1).fit(P).transform([[0.2]])
    assert out[0, 0] == pytest.approx(-11475615744 / 6103515625)


def test_pipeline_and_input_checks():
    pipe = make_pipeline(FreeEnergyBracketTransformer(N=3))
    assert pipe.fit_transform(P).shape == (3, 3)
    with pytest.raises(ValueError):
        FreeEnergyBracketTransformer().fit([[1.5]])
    with pytest.raises(ValueError):
        FreeEnergyBracketTransformer().fit([[0.1, 0.2]])
