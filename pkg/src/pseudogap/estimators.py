"""scikit-learn style wrappers around the spectral and model pipelines."""

import math

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .critical import PowerLawQ1, WvNProblem
from .floquet import PeriodicBackground, band_edges
from .model import model_fixture, solve_model
from .spectral import spectral_density

__all__ = ["SpectralDensity", "PseudogapRegressor", "ModelProblem"]


class SpectralDensity(BaseEstimator, RegressorMixin):
    """Spectral density of the half-line operator at given energies.

    ``fit`` builds the background, the band structure and the problem;
    ``predict`` maps a column of energies to ``rho'``.
    """

    def __init__(self, background="free", a=1.0, v0=0.0, c=0.0, omega=0.3 * math.pi, delta=0.0,
                 gamma=0.75, alpha=0.0, c1=0.0, alpha1=1.0, j_max=3, x_max_cap=4e6):
        self.background = background
        self.a = a
        self.v0 = v0
        self.c = c
        self.omega = omega
        self.delta = delta
        self.gamma = gamma
        self.alpha = alpha
        self.c1 = c1
        self.alpha1 = alpha1
        self.j_max = j_max
        self.x_max_cap = x_max_cap

    def _background(self):
        if self.background == "free":
            return PeriodicBackground.free(self.a)
        if self.background == "constant":
            return PeriodicBackground.constant(self.v0, self.a)
        if isinstance(self.background, PeriodicBackground):
            return self.background
        raise ValueError(f"unknown background {self.background!r}")

    def fit(self, X=None, y=None):
        bg = self._background()
        self.bands_ = band_edges(bg, int(self.j_max))
        q1 = PowerLawQ1(self.c1, self.alpha1) if self.c1 else None
        self.problem_ = WvNProblem(bg, self.c, self.omega, self.delta, self.gamma, q1, self.alpha)
        return self

    def predict(self, X):
        check_is_fitted(self, "problem_")
        lam = check_array(X, ensure_2d=False).reshape(-1)
        return np.array([spectral_density(self.problem_, float(l), self.bands_,
                                          cap=self.x_max_cap).rho_prime for l in lam])


class PseudogapRegressor(BaseEstimator, RegressorMixin):
    """Least-squares law ``ln rho' = slope |lambda - nu|^(-(1-gamma)/gamma) + intercept``."""

    def __init__(self, gamma=0.75):
        self.gamma = gamma

    def _feature(self, X):
        off = np.abs(check_array(X, ensure_2d=False).reshape(-1))
        if np.any(off <= 0):
            raise ValueError("offsets must be nonzero")
        return off ** (-(1 - self.gamma) / self.gamma)

    def fit(self, X, y):
        X, y = check_X_y(np.asarray(X).reshape(-1, 1), y, y_numeric=True)
        if X.shape[0] < 5:
            raise ValueError("at least 5 samples are required")
        s = self._feature(X)
        basis = np.column_stack([s, np.ones_like(s)])
        coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
        self.slope_, self.intercept_ = float(coef[0]), float(coef[1])
        self.c_cr_ = -0.5 * self.slope_
        return self

    def predict(self, X):
        check_is_fitted(self, "slope_")
        return self.slope_ * self._feature(X) + self.intercept_


class ModelProblem(BaseEstimator):
    """Model system; ``predict`` maps ``eps0`` values to ``lim |u|``."""

    def __init__(self, beta=0.25, gamma=0.6, fixture="zero", f=(1.0, 0.0)):
        self.beta = beta
        self.gamma = gamma
        self.fixture = fixture
        self.f = f

    def fit(self, X=None, y=None):
        self.spec_ = model_fixture(self.fixture, self.beta, self.gamma, self.f)
        return self

    def predict(self, X):
        check_is_fitted(self, "spec_")
        e0 = check_array(X, ensure_2d=False).reshape(-1)
        return np.array([solve_model(self.spec_, float(e)).limit_norm for e in e0])
