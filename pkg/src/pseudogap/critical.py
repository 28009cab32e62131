"""Critical (resonance) points of the Wigner-von Neumann perturbation."""

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize

from .floquet import (PeriodicBackground, EdgeProximityError, bloch, discriminant,
                      fourier_bn_plus, psi_plus, quasimomentum, _k_raw)

__all__ = [
    "ResonanceCollision",
    "DegenerateResonance",
    "PowerLawQ1",
    "WvNProblem",
    "CriticalPoint",
    "locate_critical",
    "beta_phi_cr",
    "coupling",
    "eps_cr",
    "eps_cr_inverse",
    "detuning",
    "neighborhood",
    "critical_point",
]


class ResonanceCollision(ValueError):
    pass


class DegenerateResonance(ValueError):
    pass


@dataclass(frozen=True)
class PowerLawQ1:
    """Short-range term ``q1(x) = c1 / (1 + x)**(1 + alpha1)``."""

    c1: float = 0.0
    alpha1: float = 1.0

    def __call__(self, x):
        return self.c1 * (1.0 + np.asarray(x, dtype=float)) ** (-(1.0 + self.alpha1))

    @property
    def envelope(self):
        return abs(self.c1), self.alpha1


@dataclass(frozen=True)
class WvNProblem:
    """``-y'' + (q(x) + c sin(2 omega x + delta)/x**gamma + q1(x)) y = lambda y``
    on the half-line with boundary angle ``alpha``: ``y(0) = sin(alpha)``,
    ``y'(0) = cos(alpha)``.

    A negative ``omega`` is folded into ``(c, delta)`` so that ``omega > 0``.
    """

    bg: PeriodicBackground
    c: float
    omega: float
    delta: float = 0.0
    gamma: float = 0.75
    q1: PowerLawQ1 = field(default_factory=PowerLawQ1)
    alpha: float = 0.0

    def __post_init__(self):
        if not 0.5 < self.gamma < 1.0:
            raise ValueError(f"gamma = {self.gamma!r} must lie in (1/2, 1)")
        if self.omega == 0 or not np.isfinite(self.omega):
            raise ValueError("omega must be nonzero and finite")
        if self.omega < 0:
            object.__setattr__(self, "omega", -self.omega)
            object.__setattr__(self, "c", -self.c)
            object.__setattr__(self, "delta", -self.delta)
        r = 2 * self.bg.a * self.omega / math.pi
        if abs(r - round(r)) < 1e-9:
            raise ResonanceCollision(
                "2*a*omega/pi is an integer: critical points would coincide with band edges "
                "(they must not coincide with the endpoints)")
        if not 0.0 <= self.alpha < math.pi:
            raise ValueError("alpha must lie in [0, pi)")
        if self.q1 is not None:
            c1, a1 = self.q1.envelope
            if a1 <= 0:
                raise ValueError("q1 envelope exponent alpha1 must be positive")
            x = np.geomspace(1e-3, 1e6, 64)
            if np.any(np.abs(self.q1(x)) > c1 * x ** (-(1 + a1)) * (1 + 1e-12) + 1e-300):
                # the envelope is checked on (1, inf) only; near 0 q1 stays bounded
                big = x >= 1
                if np.any(np.abs(self.q1(x[big])) > c1 * x[big] ** (-(1 + a1)) * (1 + 1e-12)):
                    raise ValueError("q1 violates its declared envelope")

    @property
    def frac(self):
        r = self.bg.a * self.omega / math.pi
        return r - math.floor(r)

    @property
    def floor(self):
        return math.floor(self.bg.a * self.omega / math.pi)

    def with_alpha(self, alpha):
        return replace(self, alpha=float(alpha) % math.pi)

    def kernel_params(self, lam):
        q1 = self.q1 if self.q1 is not None else PowerLawQ1()
        return self.bg.kernel_params(lam, self.c, self.omega, self.delta, self.gamma,
                                     q1.c1, q1.alpha1)


@dataclass(frozen=True)
class CriticalPoint:
    j: int
    sign: str
    nu: float
    k_target: float
    n_cr: int
    kprime: float
    gamma: float
    beta_cr: float = float("nan")
    phi_cr: float = float("nan")
    wronskian_abs: float = float("nan")


def locate_critical(problem, bands, j, sign):
    """Solve ``k(nu) = pi(j+1-{a w/pi})`` (sign +) or ``pi(j+{a w/pi})`` (sign -)."""
    if sign not in ("+", "-"):
        raise ValueError("sign must be '+' or '-'")
    if j < 0 or j > bands.j_max:
        raise ValueError(f"band {j} is not in the band structure")
    frac, fl = problem.frac, problem.floor
    if sign == "+":
        target = math.pi * (j + 1 - frac)
        n_cr = -(j + 1 + fl)
    else:
        target = math.pi * (j + frac)
        n_cr = fl - j
    bg = problem.bg
    lo, hi = bands.lower[j], bands.upper[j]
    dtarget = 2.0 * math.cos(target)
    nu = optimize.brentq(lambda t: discriminant(bg, t) - dtarget, lo, hi,
                         xtol=1e-11 * (hi - lo), rtol=1e-15)
    k, kp = quasimomentum(bg, bands, nu)
    if abs(k - target) > 1e-6:
        raise RuntimeError("critical point branch mismatch")
    return CriticalPoint(int(j), sign, float(nu), float(target), int(n_cr), float(kp),
                         problem.gamma)


def _resonance_integral(problem, crit, bd, npts=512):
    """``int_0^a psi_(+-)^2 exp(2 i omega t) dt`` for the sign of ``crit``."""
    bg = problem.bg
    t = np.arange(npts) * (bg.a / npts)
    val, _ = psi_plus(bd, t)
    if crit.sign == "-":
        val = np.conj(val)
    return complex(bg.a * np.mean(val ** 2 * np.exp(2j * problem.omega * t)))


def beta_phi_cr(problem, crit, bd):
    """``beta_cr`` and ``phi_cr`` from the one-period resonance integral."""
    integral = _resonance_integral(problem, crit, bd)
    scale = bd.bg.a * abs(bd.psi_plus_seed[0]) ** 2 + 1e-300
    # the Bloch waves carry ~1e-12 integration noise; 1e-10 sits above it
    if abs(integral) < 1e-10 * max(scale, 1.0):
        raise DegenerateResonance(f"resonance integral vanishes at nu_{crit.j}{crit.sign}")
    beta = abs(problem.c) / (2 * bd.bg.a * abs(bd.wronskian)) * abs(integral)
    s = 1.0 if crit.sign == "+" else -1.0
    phi = s * (problem.delta + np.angle(integral))
    phi = math.remainder(phi, 2 * math.pi)
    if phi <= -math.pi:
        phi += 2 * math.pi
    return float(beta), float(phi)


def critical_point(problem, bands, j, sign, rescale=None):
    """Located critical point with ``beta_cr``, ``phi_cr`` and ``|W|`` filled.

    ``|W|`` is taken in the gauge where ``psi_+`` has unit mean square over a
    period (``2k`` for plane waves), so it does not depend on the Bloch
    normalization.
    """
    crit = locate_critical(problem, bands, j, sign)
    bd = bloch(problem.bg, bands, crit.nu, rescale=rescale)
    beta, phi = beta_phi_cr(problem, crit, bd)
    t = np.arange(512) * (problem.bg.a / 512)
    val, _ = psi_plus(bd, t)
    w_abs = abs(bd.wronskian) / float(np.mean(np.abs(val) ** 2))
    return replace(crit, beta_cr=beta, phi_cr=phi, wronskian_abs=w_abs)


def coupling(problem, crit, bd):
    """Resonant coupling ``z`` at the energy of ``bd``.

    Near the critical point the Jost coefficient obeys
    ``A' ~ z x**-gamma exp(i detuning x) conj(A)``; ``|z(nu)| = beta_cr``.
    """
    b = fourier_bn_plus(bd, crit.n_cr)
    if crit.sign == "+":
        return -problem.c * b * np.exp(1j * problem.delta) / (2j * bd.wronskian)
    return problem.c * b * np.exp(-1j * problem.delta) / (2j * bd.wronskian)


def _k_in_band(problem, bands, crit, lam):
    lo, hi = bands.lower[crit.j], bands.upper[crit.j]
    if not lo < lam < hi:
        raise EdgeProximityError(f"lambda = {lam!r} is outside band {crit.j}")
    return _k_raw(problem.bg, crit.j, lam)


def eps_cr(problem, bands, crit, lam):
    """``2 pi (k(lambda) - k(nu)) / a`` as written for the model reduction."""
    return 2 * math.pi * (_k_in_band(problem, bands, crit, lam) - crit.k_target) / problem.bg.a


def detuning(problem, bands, crit, lam):
    """Oscillation rate ``2 (k(lambda) - k(nu)) / a`` of the resonant term."""
    return 2 * (_k_in_band(problem, bands, crit, lam) - crit.k_target) / problem.bg.a


def eps_cr_inverse(problem, bands, crit, eps0):
    """Energy with ``eps_cr(lambda) = eps0`` inside the band of ``crit``."""
    bg = problem.bg
    k = crit.k_target + eps0 * bg.a / (2 * math.pi)
    lo_k, hi_k = crit.j * math.pi, (crit.j + 1) * math.pi
    if not lo_k < k < hi_k:
        raise ValueError("target outside the band")
    dtarget = 2.0 * math.cos(k)
    lo, hi = bands.lower[crit.j], bands.upper[crit.j]
    return optimize.brentq(lambda t: discriminant(bg, t) - dtarget, lo, hi,
                           xtol=1e-13 * max(1.0, abs(hi)), rtol=1e-15)


def neighborhood(problem, bands, crit):
    """Guarded neighbourhood: 80% of the distance to the nearest edge or other
    critical point of the same band on each side."""
    lo, hi = bands.lower[crit.j], bands.upper[crit.j]
    other = locate_critical(problem, bands, crit.j, "-" if crit.sign == "+" else "+")
    left = max(lo, other.nu) if other.nu < crit.nu else lo
    right = min(hi, other.nu) if other.nu > crit.nu else hi
    return crit.nu - 0.8 * (crit.nu - left), crit.nu + 0.8 * (right - crit.nu)
