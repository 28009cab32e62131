"""Closed-form asymptotic constants of the pseudogap law and the model problem."""

import math
from dataclasses import dataclass

from scipy import integrate

from .numkit import beta_fn, quad_adaptive, quad_pv, QuadratureError

__all__ = [
    "AsymptoticPrediction",
    "ExponentResult",
    "exponent_coefficient",
    "c_cr",
    "c_cr_physical",
    "c_mp",
    "a_cr",
    "predict",
    "ConsistencyError",
]


class ConsistencyError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExponentResult:
    value: float
    quadrature: float
    discrepancy: float


@dataclass(frozen=True)
class AsymptoticPrediction:
    exponent_coeff: float
    c_cr: float
    C_mp: float
    a_cr: float
    c_vp: float
    a_cr_discrepancy: float = 0.0


def _check(beta, gamma):
    if not beta > 0:
        raise ValueError("beta must be positive")
    if not 0.5 < gamma < 1.0:
        raise ValueError("gamma must lie in (1/2, 1)")


def exponent_coefficient(beta, gamma, full_output=False):
    """``E = int_0^t0 sqrt(beta^2/t^(2 gamma) - 1/4) dt``, ``t0 = (2 beta)^(1/gamma)``.

    The beta-function form is returned; the direct quadrature (algebraic
    weights ``t^-gamma`` and ``(t0-t)^(1/2)``) is kept as a cross-check.
    """
    _check(beta, gamma)
    t0 = (2 * beta) ** (1 / gamma)
    closed = (2 * beta) ** (1 / gamma) / (4 * gamma) * beta_fn(1.5, (1 - gamma) / (2 * gamma))
    p = 2 * gamma

    def smooth(t):
        # sqrt((t0^p - t^p) / 4 / (t0 - t)), continuous at t0
        if t0 - t < 1e-9 * t0:
            return 0.5 * math.sqrt(p * t0 ** (p - 1))
        return 0.5 * math.sqrt((t0 ** p - t ** p) / (t0 - t))

    quad, err = integrate.quad(smooth, 0.0, t0, weight="alg", wvar=(-gamma, 0.5),
                               epsabs=0.0, epsrel=1e-13, limit=200)
    disc = abs(quad - closed) / closed
    if disc > 1e-7:
        raise ConsistencyError(f"exponent quadrature disagrees with beta form ({disc:.2e})")
    if full_output:
        return ExponentResult(closed, quad, disc)
    return closed


def c_cr(crit, a):
    """``(2 beta)^(1/gamma)/(4 gamma) B(3/2, (1-gamma)/(2 gamma)) (a/(2 pi k'))^((1-gamma)/gamma)``."""
    g = crit.gamma
    if not (crit.beta_cr > 0 and crit.kprime > 0):
        raise ValueError("critical point needs beta_cr > 0 and kprime > 0")
    return exponent_coefficient(crit.beta_cr, g) * (a / (2 * math.pi * crit.kprime)) ** ((1 - g) / g)


def c_cr_physical(crit, a):
    """Exponent coefficient with the detuning rate ``2 k'/a`` of the resonant term.

    Equals ``c_cr * pi**((1-gamma)/gamma)``; this is the constant the
    integrated spectral density actually follows.
    """
    g = crit.gamma
    return exponent_coefficient(crit.beta_cr, g) * (a / (2 * crit.kprime)) ** ((1 - g) / g)


def _cmp_integrals(gamma, tol=1e-13):
    u1 = 2.0 ** (-2 * gamma)

    def f1(u):
        # (1 - sqrt(1-u)) / (4u(1-u)) = 1 / (4 (1-u) (1 + sqrt(1-u)))
        s = math.sqrt(1 - u)
        return 1.0 / (4 * (1 - u) * (1 + s))

    i1 = quad_adaptive(f1, 0.0, u1, tol)
    i2, _ = integrate.quad(lambda u: 1.0 / (4 * u), u1, 1.0, weight="alg", wvar=(0.0, -0.5),
                           epsabs=0.0, epsrel=tol)
    pv = quad_pv(lambda u: 1.0 / (4 * u * (1 - u)), u1, math.inf, 1.0, tol)
    return i1, i2, pv


def c_mp(beta, gamma):
    """``(C_mp, c_vp)`` with ``C_mp = exp(c_vp)/sqrt(2)``.

    The three integrals are evaluated after ``u = (tau/t0)^(2 gamma)``,
    which removes ``beta``; the pole at ``u = 1`` is a principal value.
    """
    _check(beta, gamma)
    i1, i2, pv = _cmp_integrals(gamma)
    cvp = i1 - i2 + pv
    return math.exp(cvp) / math.sqrt(2), cvp


def _a_cr_direct(beta, gamma, w_abs, tol=1e-12):
    t0 = (2 * beta) ** (1 / gamma)
    half = t0 / 2
    p = 2 * gamma

    def g1(t):
        u = (t / t0) ** p
        s = math.sqrt(1 - u)
        return gamma * u / (t * (1 - u) * (1 + s)) if t > 0 else 0.0

    j1 = quad_adaptive(g1, 0.0, half, tol)

    def g2(t):
        # gamma / (t sqrt(1-u)) = gamma/t * sqrt((t0 - t)/(1-u)) * (t0-t)^(-1/2)
        u = (t / t0) ** p
        if t0 - t < 1e-9 * t0:
            return gamma / t * math.sqrt(t0 / p)
        return gamma / t * math.sqrt((t0 - t) / (1 - u))

    j2, _ = integrate.quad(g2, half, t0, weight="alg", wvar=(0.0, -0.5), epsabs=0.0, epsrel=tol)
    j3 = quad_pv(lambda t: gamma / (t * (1 - (t / t0) ** p)), half, math.inf, t0, tol)
    return math.exp(-j1 + j2 - j3) / (math.pi * w_abs)


def a_cr(crit, w_abs=None, full_output=False):
    """Prefactor ``a_cr`` by the direct integrals and by ``1/(2 pi |W| C_mp^2)``."""
    w_abs = crit.wronskian_abs if w_abs is None else w_abs
    if not w_abs > 0:
        raise ValueError("|W| must be positive")
    route_a = _a_cr_direct(crit.beta_cr, crit.gamma, w_abs)
    cmp_, _ = c_mp(crit.beta_cr, crit.gamma)
    route_b = 1.0 / (2 * math.pi * w_abs * cmp_ ** 2)
    disc = abs(route_a - route_b) / route_b
    if disc > 1e-7:
        raise ConsistencyError(f"a_cr routes disagree ({disc:.2e})")
    return (route_b, route_a, disc) if full_output else route_b


def predict(crit, a):
    """All constants of the pseudogap law at a populated critical point."""
    cmp_, cvp = c_mp(crit.beta_cr, crit.gamma)
    acr, _, disc = a_cr(crit, full_output=True)
    return AsymptoticPrediction(exponent_coefficient(crit.beta_cr, crit.gamma), c_cr(crit, a),
                                cmp_, acr, cvp, disc)
