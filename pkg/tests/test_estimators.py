import math

import numpy as np
import pytest
from sklearn.base import clone

from pseudogap.estimators import ModelProblem, PseudogapRegressor, SpectralDensity


def test_spectral_density_free():
    est = SpectralDensity(c=0.0, alpha=0.0).fit()
    rho = est.predict(np.array([1.0, 4.0]))
    np.testing.assert_allclose(rho, [1 / math.pi, 2 / math.pi], rtol=1e-6)


def test_spectral_density_params_and_clone():
    est = SpectralDensity(background="constant", v0=0.5, c=0.0, alpha=math.pi / 2)
    twin = clone(est)
    assert twin.get_params() == est.get_params()
    rho = twin.fit().predict([1.5])
    # constant shift: rho'(lambda) = 1/(pi sqrt(lambda - v0)) for alpha = pi/2
    assert rho[0] == pytest.approx(1 / math.pi, rel=1e-6)


def test_spectral_density_unfitted():
    with pytest.raises(Exception):
        SpectralDensity().predict([1.0])


def test_pseudogap_regressor_recovers_law():
    g = 0.6
    off = np.geomspace(3e-3, 1e-1, 7)
    y = -0.67 * off ** (-(1 - g) / g) + 1.1
    reg = PseudogapRegressor(gamma=g).fit(off, y)
    assert reg.slope_ == pytest.approx(-0.67, rel=1e-10)
    assert reg.c_cr_ == pytest.approx(0.335, rel=1e-10)
    np.testing.assert_allclose(reg.predict(off), y, rtol=1e-10)
    assert reg.score(off, y) == pytest.approx(1.0)


def test_pseudogap_regressor_validation():
    with pytest.raises(ValueError):
        PseudogapRegressor().fit([0.1, 0.2, 0.3], [1, 2, 3])
    with pytest.raises(ValueError):
        PseudogapRegressor().fit([0.0, 0.1, 0.2, 0.3, 0.4], [1, 2, 3, 4, 5])


def test_model_problem_growth_mode():
    est = ModelProblem(beta=0.25, gamma=0.6, f=(1.0, 0.0)).fit()
    assert est.predict([0.0])[0] == pytest.approx(1.0, rel=1e-8)
