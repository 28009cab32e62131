import math

import numpy as np
import pytest

from pseudogap.critical import WvNProblem, critical_point
from pseudogap.floquet import PeriodicBackground, band_edges, bloch
from pseudogap.spectral import (DensitySample, InsufficientData, _fit, _jost_samples,
                                estimate_alpha_cr, geometric_offsets, integrate_eigenfunction,
                                jost_coefficient, pseudogap_scan, sin2_law, spectral_density)


@pytest.fixture(scope="module")
def free_bg():
    bg = PeriodicBackground.free(1.0)
    return bg, band_edges(bg, 2)


@pytest.fixture(scope="module")
def resonant():
    # free background with a = 0.75 so that 2 a omega / pi = 1.5 avoids the edges
    bg = PeriodicBackground.free(0.75)
    bs = band_edges(bg, 2)
    p = WvNProblem(bg, 2.0, math.pi, 0.0, 0.6)
    return p, bs, critical_point(p, bs, 0, "-")


@pytest.fixture(scope="module")
def alpha_est(resonant):
    p, bs, cr = resonant
    return estimate_alpha_cr(p, bs, cr)


def test_free_eigenfunction_closed_form(free_bg):
    bg, _ = free_bg
    lam = 2.3
    k = math.sqrt(lam)
    for alpha in (0.0, 0.4, math.pi / 2, 2.5):
        p = WvNProblem(bg, 0.0, 0.3 * math.pi, alpha=alpha)
        xs = np.linspace(0.0, 40.0, 401)
        traj = integrate_eigenfunction(p, lam, 40.0, xs)
        exact = math.sin(alpha) * np.cos(k * xs) + math.cos(alpha) * np.sin(k * xs) / k
        np.testing.assert_allclose(traj.states[:, 0], exact, atol=1e-8)
        assert traj.states[0, 0] == math.sin(alpha) and traj.states[0, 1] == math.cos(alpha)


def test_wronskian_conserved_mathieu():
    bg = PeriodicBackground.from_callable(lambda x: 2 * np.cos(2 * np.pi * x), 1.0)
    xs = np.linspace(0.0, 60.0, 301)
    p0 = WvNProblem(bg, 0.7, 0.8 * math.pi, 0.0, 0.7, alpha=0.0)
    p1 = p0.with_alpha(math.pi / 2)
    lam = 5.0
    t0 = integrate_eigenfunction(p0, lam, 60.0, xs)
    t1 = integrate_eigenfunction(p1, lam, 60.0, xs)
    w = t0.states[:, 1] * t1.states[:, 0] - t0.states[:, 0] * t1.states[:, 1]
    assert np.abs(w - w[0]).max() < 100 * 1e-9 * 60


def test_eigenfunction_rejects_bad_grid(free_bg):
    bg, _ = free_bg
    p = WvNProblem(bg, 0.0, 0.3 * math.pi)
    with pytest.raises(ValueError):
        integrate_eigenfunction(p, 1.0, 10.0, xs=[0.0, 2.0, 1.0])


@pytest.mark.parametrize("alpha", [0.0, 1.0, math.pi / 2])
def test_free_jost_and_density(free_bg, alpha):
    bg, bs = free_bg
    p = WvNProblem(bg, 0.0, 0.3 * math.pi, alpha=alpha)
    smp = spectral_density(p, 1.0, bs)
    exact = (math.sin(alpha) + 1j * math.cos(alpha)) / 2
    assert smp.A_alpha == pytest.approx(exact, rel=1e-7)
    assert smp.converged and smp.rho_prime > 0
    if alpha in (0.0, math.pi / 2):
        assert smp.rho_prime == pytest.approx(1 / math.pi, rel=1e-6)


def test_unperturbed_estimator_constant():
    bg = PeriodicBackground.from_callable(lambda x: 2 * np.cos(2 * np.pi * x), 1.0)
    bs = band_edges(bg, 1)
    p = WvNProblem(bg, 0.0, 0.8 * math.pi, alpha=0.3)
    lam = 0.5 * (bs.lower[1] + bs.upper[1])
    _, a1, a2, _ = _jost_samples(p, bloch(bg, bs, lam), lam, 512.0, 1e-10)
    for a in (a1, a2):
        assert np.abs(a - a[0]).max() <= 1e-8 * abs(a[0])


def test_density_rescale_invariance_mathieu():
    bg = PeriodicBackground.from_callable(lambda x: 2 * np.cos(2 * np.pi * x), 1.0)
    bs = band_edges(bg, 1)
    p = WvNProblem(bg, 0.0, 0.8 * math.pi, alpha=0.7)
    lam = bs.lower[1] + 0.3 * (bs.upper[1] - bs.lower[1])
    base = spectral_density(p, lam, bs).rho_prime
    for s in (2.0, 1j, 0.5 * np.exp(1j * math.pi / 3)):
        assert spectral_density(p, lam, bs, rescale=s).rho_prime == pytest.approx(base, rel=1e-8)


def test_perturbed_density_smooth_and_positive(resonant):
    p, bs, cr = resonant
    p = p.with_alpha(1.0)
    a = spectral_density(p, cr.nu + 0.1, bs, cr)
    b = spectral_density(p, cr.nu + 0.098, bs, cr)
    assert a.converged and b.converged
    assert a.rho_prime > 0 and b.rho_prime > 0
    assert abs(a.rho_prime - b.rho_prime) < 0.1 * a.rho_prime
    # the Gram form reproduces the sample at its own angle
    assert a.rho_at(1.0) == pytest.approx(a.rho_prime, rel=1e-12)


def test_jost_requires_bands_with_crit(resonant):
    p, bs, cr = resonant
    bd = bloch(p.bg, bs, cr.nu + 0.1)
    with pytest.raises(ValueError):
        jost_coefficient(p, bd, cr.nu + 0.1, crit=cr)


def test_alpha_cr_free(alpha_est):
    est = alpha_est
    assert 0 <= est.alpha_cr < math.pi
    assert est.residual < 1e-12
    assert est.growth(est.alpha_cr) == pytest.approx(0.0, abs=1e-9 * abs(est.growth_A))
    g = est.growth(math.pi / 4)
    assert g == pytest.approx((est.growth_A + est.growth_B) / math.sqrt(2), rel=1e-2)
    # the extremal growth sits a quarter turn away
    alphas = np.linspace(0, math.pi, 721)
    best = alphas[np.argmax(np.abs([est.growth(a) for a in alphas]))]
    assert abs(math.remainder(best - est.alpha_cr - math.pi / 2, math.pi)) < 0.01


def test_alpha_cr_subordinacy_scan(resonant, alpha_est):
    # 1/rho' near nu is largest for the angle of maximal growth, smallest near alpha_cr
    p, bs, cr = resonant
    smp = spectral_density(p, cr.nu + 0.02, bs, cr)
    alphas = np.linspace(0, math.pi, 181)
    inv = np.array([1 / smp.rho_at(a) for a in alphas])
    amin = alphas[np.argmin(inv)]
    assert abs(math.remainder(amin - alpha_est.alpha_cr, math.pi)) < 0.3


def test_sin2_law_synthetic():
    gram = np.array([[2.0, 0.0], [0.0, 2.0]])
    smp = DensitySample(1.0, 1.0, 1.0, 0.0, 1.0, True, 0.0, gram, 1.0)
    spread, amin, vals = sin2_law(smp, 0.0)
    assert len(vals) == 7
    assert spread == pytest.approx((vals.max() - vals.min()) / vals.mean())
    # a rank-one form with null direction alpha_cr gives a flat sin^2 product
    acr = 0.6
    v = np.array([math.cos(acr), -math.sin(acr)])
    smp = DensitySample(1.0, 1.0, 1.0, 0.0, 1.0, True, 0.0, np.outer(v, v) + 1e-14 * np.eye(2), 1.0)
    spread, amin, _ = sin2_law(smp, acr)
    assert spread < 1e-10
    assert abs(math.remainder(amin - acr, math.pi)) < 1e-6


def test_geometric_offsets():
    off = geometric_offsets(1e-3, 1e-1)
    assert len(off) == 9
    np.testing.assert_allclose(off[1:] / off[:-1], 10 ** 0.25)


def test_fit_recovers_slope_and_refuses_small_sets():
    g = 0.6
    off = geometric_offsets(3e-3, 1e-1)
    pts = [(o, -1.3 * o ** (-(1 - g) / g) + 0.4) for o in off]
    fit = _fit("above", pts, g, -1.0, -1.3)
    assert fit.slope == pytest.approx(-1.3, rel=1e-10)
    assert fit.rel_dev == pytest.approx(0.3) and fit.rel_dev_physical < 1e-9
    with pytest.raises(InsufficientData):
        _fit("above", pts[:4], g, -1.0, -1.3)


def test_scan_preconditions(resonant, alpha_est):
    p, bs, cr = resonant
    near = p.with_alpha(alpha_est.alpha_cr + 0.05)
    with pytest.raises(ValueError, match="alpha"):
        pseudogap_scan(near, bs, cr, [0.01], alpha_cr=alpha_est.alpha_cr)
    with pytest.raises(ValueError, match="neighbourhood"):
        pseudogap_scan(p, bs, cr, [7.0])
