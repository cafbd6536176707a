"""scikit-learn adapters that map a column of p values to system quantities.

Nothing is learned from data: ``fit`` validates input and builds whatever
depends only on the hyperparameters (the critical point, the symbolic law).
Floats in the input are read through their shortest decimal repr, so 0.2
means exactly 1/5 in the exact computations.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Any

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .model import ModelSpec, StarLaw, classify, critical_p
from .observables import free_energy_bracket
from .polymode import poly_initial, poly_iterate


def _star(star: Any, m: int) -> StarLaw:
    if isinstance(star, StarLaw):
        return star
    if isinstance(star, dict):
        return StarLaw.from_json(star, m=m)
    if isinstance(star, int):
        return StarLaw.dirac(star)
    raise TypeError("star must be a StarLaw, a JSON-style dict or an integer atom")


def _p_column(X) -> tuple[np.ndarray, list[Fraction]]:
    X = check_array(X, dtype=np.float64, ensure_min_features=1)
    if X.shape[1] != 1:
        raise ValueError(f"expected a single column of p values, got {X.shape[1]} columns")
    col = X[:, 0]
    if np.any((col < 0) | (col > 1)):
        raise ValueError("p values must lie in [0, 1]")
    return X, [Fraction(repr(float(v))) for v in col]


class _PBase(BaseEstimator):
    def _fit_common(self, X):
        X, _ = _p_column(X)
        self.n_features_in_ = X.shape[1]
        self.star_ = _star(self.star, self.m)
        return self


class FreeEnergyBracketTransformer(TransformerMixin, _PBase):
    """p -> (L_N, U_N, S_N) in float64, computed in exact arithmetic."""

    def __init__(self, m: int = 2, star: Any = 2, N: int = 8):
        self.m = m
        self.star = star
        self.N = N

    def fit(self, X, y=None):
        if self.N < 0:
            raise ValueError("N must be >= 0")
        return self._fit_common(X)

    def transform(self, X):
        check_is_fitted(self, "star_")
        _, ps = _p_column(X)
        out = np.empty((len(ps), 3))
        for r, p in enumerate(ps):
            b = free_energy_bracket(ModelSpec(self.m, self.star_, p), self.N)
            out[r] = float(b.L), float(b.U), float(b.S)
        return out

    def get_feature_names_out(self, input_features=None):
        return np.array(["L", "U", "S"], dtype=object)


class PhaseClassifier(ClassifierMixin, _PBase):
    """Predicts subcritical / critical / supercritical from p, exactly."""

    def __init__(self, m: int = 2, star: Any = 2):
        self.m = m
        self.star = star

    def fit(self, X, y=None):
        self._fit_common(X)
        self.critical_p_ = critical_p(self.m, self.star_)
        self.classes_ = np.array(["critical", "subcritical", "supercritical"])
        return self

    def predict(self, X):
        check_is_fitted(self, "critical_p_")
        _, ps = _p_column(X)
        return np.array([classify(ModelSpec(self.m, self.star_, p)).value for p in ps])


class ZeroMassDerivative(TransformerMixin, _PBase):
    """p -> d^k/dp^k P(X_n = 0), exact then cast to float64."""

    def __init__(self, m: int = 2, star: Any = 2, n: int = 4, k: int = 1):
        self.m = m
        self.star = star
        self.n = n
        self.k = k

    def fit(self, X, y=None):
        self._fit_common(X)
        pd = poly_iterate(poly_initial(self.m, self.star_), self.n)[-1]
        self.poly_ = pd.mass(0).derivative(self.k)
        return self

    def transform(self, X):
        check_is_fitted(self, "poly_")
        _, ps = _p_column(X)
        return np.array([[float(self.poly_(p))] for p in ps])

    def get_feature_names_out(self, input_features=None):
        return np.array([f"d{self.k}_P0_n{self.n}"], dtype=object)
