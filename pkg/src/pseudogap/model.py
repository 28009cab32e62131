"""The 2x2 model problem with a rotating carrier and an x**-gamma envelope,
its growth functional, the turning-point schedule and the Airy connection."""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .asymptotic import c_mp, exponent_coefficient
from .numkit import airy_pair, integrate_ivp, tail_limit, TailError

__all__ = [
    "ModelSpec",
    "ModelSolution",
    "PhiResult",
    "Theorem42Row",
    "RegionSchedule",
    "ScheduleError",
    "ConnectionReport",
    "REMAINDER_FIXTURES",
    "model_fixture",
    "solve_model",
    "phi_functional",
    "verify_theorem42",
    "region_schedule",
    "z_map",
    "z_unmap",
    "airy_matrix_solution",
    "connection_matrix",
]

X_START = 1e-6
MODEL_TOL = 1e-10


def _offdiag(x, eps0):
    return 0.1 / (1.0 + x) ** 2 * np.array([[0.0, 1.0], [1.0, 0.0]])


def _diag_mix(x, eps0):
    return 0.2 / (1.0 + x) ** 2 * np.array([[1.0, 0.5], [-0.5, -1.0]])


# name -> (remainder, envelope (c_r, alpha_r))
REMAINDER_FIXTURES = {
    "zero": (None, (0.0, 1.0)),
    "offdiag": (_offdiag, (0.1, 1.0)),
    "diagmix": (_diag_mix, (0.2 * math.sqrt(2.5), 1.0)),
}


@dataclass(frozen=True)
class ModelSpec:
    """``u' = (beta/x^gamma) [[cos e0 x, sin e0 x], [sin e0 x, -cos e0 x]] u + R(x, e0) u``,
    ``u(0) = f``."""

    beta: float
    gamma: float
    remainder: Optional[Callable] = None
    envelope: tuple = (0.0, 1.0)
    f: tuple = (1.0, 0.0)

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not 0.5 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (1/2, 1)")
        f = np.asarray(self.f, dtype=complex)
        if f.shape != (2,) or not np.any(f != 0):
            raise ValueError("f must be a nonzero vector in C^2")
        if self.remainder is not None:
            c_r, a_r = self.envelope
            for x in np.geomspace(1e-3, 1e5, 25):
                for e0 in (0.0, 0.05, -0.05):
                    if np.linalg.norm(self.remainder(x, e0), 2) > c_r / (1 + x) ** (1 + a_r) * (1 + 1e-9):
                        raise ValueError(f"remainder exceeds its envelope at x = {x!r}")
                jump = self.remainder(x, 1e-6) - self.remainder(x, 0.0)
                jump2 = self.remainder(x, -1e-6) - self.remainder(x, 0.0)
                if max(np.abs(jump).max(), np.abs(jump2).max()) > 1e-4 * (c_r + 1e-300):
                    raise ValueError("remainder is not continuous at eps0 = 0")

    @property
    def f_vec(self):
        return np.asarray(self.f, dtype=complex)

    def with_f(self, f):
        return ModelSpec(self.beta, self.gamma, self.remainder, self.envelope, tuple(complex(v) for v in f))

    def envelope_exponent(self, x):
        """``B(x) = beta x^(1-gamma)/(1-gamma)``."""
        return self.beta * np.asarray(x, dtype=float) ** (1 - self.gamma) / (1 - self.gamma)


def model_fixture(name, beta, gamma, f=(1.0, 0.0)):
    if name not in REMAINDER_FIXTURES:
        raise KeyError(f"unknown remainder fixture {name!r}")
    rem, env = REMAINDER_FIXTURES[name]
    return ModelSpec(beta, gamma, rem, env, tuple(f))


def _field(spec, eps0):
    beta, g, rem = spec.beta, spec.gamma, spec.remainder

    def fun(x, u):
        b = beta * x ** (-g)
        c, s = math.cos(eps0 * x), math.sin(eps0 * x)
        out = np.array([b * (c * u[0] + s * u[1]), b * (s * u[0] - c * u[1])])
        if rem is not None:
            out = out + rem(x, eps0) @ u
        return out

    return fun


def _start(spec, f):
    bs = float(spec.envelope_exponent(X_START))
    return np.array([math.exp(bs) * f[0], math.exp(-bs) * f[1]], dtype=complex)


def _invariant(spec, eps0, x, u):
    """Adiabatic invariant of the R = 0 system; tends to ``|u|^2`` as x grows."""
    half = 0.5 * eps0 * x
    c, s = np.cos(half), np.sin(half)
    w0 = c * u[..., 0] + s * u[..., 1]
    w1 = s * u[..., 0] - c * u[..., 1]
    e = 0.5 * eps0
    b = spec.beta * x ** (-spec.gamma)
    mu = np.sqrt(e * e - b * b)
    val = (e * (np.abs(w0) ** 2 + np.abs(w1) ** 2) - 2 * b * np.real(w0 * np.conj(w1))) / mu
    return np.sign(e) * val


@dataclass
class ModelSolution:
    eps0: float
    x_max: float
    limit_norm: float
    error_bar: float
    converged: bool
    terminal: np.ndarray
    log_scale: float
    growth: Optional[np.ndarray] = None
    nsteps: int = 0


def default_x_max(spec, eps0):
    if eps0 == 0:
        return 1e4
    x = max(10 * abs(eps0) ** (-1 / spec.gamma), 1e5)
    # the invariant needs beta x^-gamma well below |eps0|/2 on the window
    x_turn = (2 * spec.beta / abs(eps0)) ** (1 / spec.gamma)
    return max(x, 8 * x_turn)


def solve_model(spec, eps0, x_max=None, tol=MODEL_TOL, f=None, n_samples=2048):
    """Integrate the model system from ``u(0) = f``.

    For ``eps0 != 0`` the limit of ``|u|`` is returned (period-averaged tail
    of the adiabatic invariant); for ``eps0 == 0`` the coefficients of the
    ``exp(+-B(x))`` envelopes are returned in ``growth``.
    """
    f = spec.f_vec if f is None else np.asarray(f, dtype=complex)
    x_max = default_x_max(spec, eps0) if x_max is None else float(x_max)
    fun = _field(spec, eps0)
    y0 = _start(spec, f)
    xs = np.linspace(0.5 * x_max, x_max, n_samples)
    if eps0 == 0:
        traj = integrate_ivp(fun, (X_START, x_max), y0, tol=tol, t_eval=xs, renormalize_every=200)
        bx = spec.envelope_exponent(xs)
        g_plus = traj.states[:, 0] * np.exp(traj.log_scale - bx)
        g_minus = traj.states[:, 1] * np.exp(traj.log_scale + bx)
        est = tail_limit(xs, g_plus, (xs[-1] - xs[0]) / 16,
                         decay_exponent=-spec.envelope[1] if spec.remainder is not None else 0.0)
        return ModelSolution(0.0, x_max, abs(est.value), est.error_bar, est.converged, traj.terminal,
                             traj.terminal_log_scale, np.array([est.value, g_minus[-1]]), traj.nsteps)
    period = 2 * math.pi / abs(eps0)
    traj = integrate_ivp(fun, (X_START, x_max), y0, tol=tol, t_eval=xs, carrier_frequency=abs(eps0),
                         renormalize_every=200)
    inv = _invariant(spec, eps0, xs, traj.states) * np.exp(2 * traj.log_scale)
    if np.any(inv <= 0):
        raise TailError("adiabatic invariant is not positive on the tail window")
    est = tail_limit(xs, np.sqrt(inv), period, decay_exponent=1 - 2 * spec.gamma)
    return ModelSolution(float(eps0), x_max, float(np.real(est.value)), est.error_bar, est.converged,
                         traj.terminal, traj.terminal_log_scale, None, traj.nsteps)


@dataclass
class PhiResult:
    growth: complex
    integral: complex
    f_minus: np.ndarray
    discrepancy: float


def _f_minus(spec, x_far, tol):
    fun = _field(spec, 0.0)
    bx = float(spec.envelope_exponent(x_far))
    # decaying mode normalized by its envelope; backward integration is stable for it
    traj = integrate_ivp(fun, (x_far, X_START), np.array([0.0, 1.0], dtype=complex), tol=tol,
                         renormalize_every=200)
    u = traj.terminal * math.exp(traj.terminal_log_scale - bx)
    bs = float(spec.envelope_exponent(X_START))
    f = np.array([u[0] * math.exp(-bs), u[1] * math.exp(bs)])
    f = f / np.linalg.norm(f)
    k = np.argmax(np.abs(f))
    return f * (abs(f[k]) / f[k])


def phi_functional(spec, f=None, x_max=1e4, tol=MODEL_TOL):
    """Growth functional at ``eps0 = 0`` by two routes, and its null direction."""
    f = spec.f_vec if f is None else np.asarray(f, dtype=complex)
    sol = solve_model(spec, 0.0, x_max=x_max, tol=tol, f=f)
    route1 = complex(sol.growth[0])
    if spec.remainder is None:
        route2 = complex(f[0])
        fm = np.array([0.0, 1.0], dtype=complex)
        return PhiResult(route1, route2, fm, abs(route1 - route2) / max(abs(route2), 1e-300))
    rem = spec.remainder
    beta, g = spec.beta, spec.gamma

    # envelope-scaled state v = exp(-B) u keeps every component O(1), so the
    # relative step control also governs the accumulated integral
    def aug(x, y):
        b = beta * x ** (-g)
        r = rem(x, 0.0)
        v = y[:2]
        rv = r @ v
        return np.array([rv[0], -2 * b * v[1] + rv[1], rv[0]])

    bs = float(spec.envelope_exponent(X_START))
    y0 = np.concatenate([_start(spec, f) * math.exp(-bs), [0.0]])
    traj = integrate_ivp(aug, (X_START, x_max), y0.astype(complex), tol=tol)
    partial = f[0] + traj.terminal[2]
    # tail: u ~ Phi exp(B) e+ beyond x_max
    tail11, _ = integrate.quad(lambda x: rem(x, 0.0)[0, 0], x_max, np.inf, epsabs=1e-14)
    route2 = complex(partial * (1 + tail11))
    # near the null direction Phi ~ 0; compare against the input scale there
    disc = abs(route1 - route2) / max(abs(route2), 1e-6 * np.linalg.norm(f))
    if disc > 1e-3:
        raise RuntimeError(f"growth routes disagree ({disc:.2e})")
    return PhiResult(route1, route2, _f_minus(spec, x_max, tol), disc)


@dataclass
class Theorem42Row:
    eps0: float
    eps: float
    limit_norm: float
    error_bar: float
    ratio: float
    target: float
    converged: bool


def verify_theorem42(spec, eps0_list, both_signs=True, tol=MODEL_TOL, phi=None):
    """``lim |u| exp(-E/eps)`` with ``eps = |eps0|^((1-gamma)/gamma)`` against ``C_mp |Phi(f)|``."""
    eps0_list = [float(e) for e in eps0_list]
    if any(e <= 0 for e in eps0_list):
        raise ValueError("eps0 values must be positive; signs are handled by both_signs")
    E = exponent_coefficient(spec.beta, spec.gamma)
    cmp_, _ = c_mp(spec.beta, spec.gamma)
    if phi is None:
        phi = phi_functional(spec).growth if spec.remainder is not None else spec.f_vec[0]
    target = cmp_ * abs(phi)
    rows = []
    for e0 in eps0_list:
        for s in ((1.0, -1.0) if both_signs else (1.0,)):
            sol = solve_model(spec, s * e0, tol=tol)
            eps = e0 ** ((1 - spec.gamma) / spec.gamma)
            scale = math.exp(-E / eps)
            rows.append(Theorem42Row(s * e0, eps, sol.limit_norm, sol.error_bar, sol.limit_norm * scale,
                                     target, sol.converged))
    return rows


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class RegionSchedule:
    beta: float
    gamma: float
    eps: float
    Z0: float
    t0: float
    c0: float
    kappa: float
    t_I_II: float
    Z1: float
    Z2: float
    t_II_III: float
    t_III_IV: float
    t_IV_V: float

    @property
    def z_ordered(self):
        return self.Z0 < self.Z1 < self.Z2

    @property
    def t_ordered(self):
        return self.t_I_II < self.t_II_III < self.t0 < self.t_III_IV < self.t_IV_V


def z_map(t, eps, beta, gamma):
    """``z = eps^(-2/3) (1 - t^(2 gamma)/(4 beta^2))``."""
    return eps ** (-2 / 3) * (1 - np.asarray(t, dtype=float) ** (2 * gamma) / (4 * beta ** 2))


def z_unmap(z, eps, beta, gamma):
    arg = 1 - eps ** (2 / 3) * np.asarray(z, dtype=float)
    if np.any(arg <= 0):
        raise ScheduleError("z lies beyond the image of the half-line")
    return (2 * beta) ** (1 / gamma) * arg ** (1 / (2 * gamma))


def region_schedule(beta, gamma, eps, Z0=6.0, strict=True):
    """Region boundaries around the turning point ``t0 = (2 beta)^(1/gamma)``."""
    if not (beta > 0 and 0.5 < gamma < 1 and eps > 0 and Z0 > 0):
        raise ValueError("invalid schedule parameters")
    t0 = (2 * beta) ** (1 / gamma)
    t12 = t0 * 0.8 ** (1 / (2 * gamma))
    z2 = eps ** (-2 / 3) * (1 - t12 ** (2 * gamma) / (4 * beta ** 2))
    if eps ** (2 / 3) * Z0 >= 1:
        raise ScheduleError("eps too large: the region III boundary leaves the half-line")
    sched = RegionSchedule(
        beta, gamma, eps, Z0, t0, t0 / (4 * gamma), 1.5 - 1 / (2 * gamma), t12,
        eps ** (-1 / 5), z2,
        float(z_unmap(Z0, eps, beta, gamma)), float(z_unmap(-Z0, eps, beta, gamma)),
        (8 * beta ** 2 - t12 ** (2 * gamma)) ** (1 / (2 * gamma)))
    if strict and not sched.t_ordered:
        raise ScheduleError(f"region ordering violated at eps = {eps!r} (Z0 = {Z0!r})")
    return sched


def airy_matrix_solution(z, c0):
    """``[[Ai(s), Bi(s)], [c0^(-1/3) Ai'(s), c0^(-1/3) Bi'(s)]]``, ``s = c0^(2/3) z``;
    solves ``v' = c0 [[0, 1], [z, 0]] v``."""
    if not c0 > 0:
        raise ValueError("c0 must be positive")
    ai, bi, aip, bip = airy_pair(c0 ** (2 / 3) * float(z))
    k = c0 ** (-1 / 3)
    return np.array([[ai, bi], [k * aip, k * bip]])


@dataclass
class ConnectionReport:
    eps: float
    D_matrix: np.ndarray
    col1_target_dev: float
    det_dev: float
    col1_limit_dev: float = float("nan")
    det_limit_dev: float = float("nan")
    schedule: Optional[RegionSchedule] = field(default=None, repr=False)


COL1_TARGET = np.array([1j, -1j]) / math.sqrt(2)
DET_TARGET = 0.5
# limit of the exact Airy connection (leading negative-argument asymptotics)
COL1_LIMIT = np.exp(0.25j * math.pi * np.array([1.0, -1.0]))
DET_LIMIT = 1.0


def _cquad(f, a, b):
    if a == b:
        return 0j
    re = integrate.quad(lambda s: f(s).real, a, b, epsabs=1e-13)[0]
    im = integrate.quad(lambda s: f(s).imag, a, b, epsabs=1e-13)[0]
    return re + 1j * im


def connection_matrix(beta, gamma, eps, Z0=6.0, z_seed=None, tol=1e-11):
    """Connection matrix ``D`` with ``U_II = U_IV D`` across the turning point.

    Region II and region IV bases are seeded at ``z = +-z_seed`` from their
    WKB asymptotics (amplitudes ``a^{+-}`` referred to ``+-Z0``) and the
    ``eps``-scaled system ``eps u' = [[beta/t^g, -1/2], [1/2, -beta/t^g]] u``
    is integrated between them.
    """
    sched = region_schedule(beta, gamma, eps, Z0, strict=False)
    zs = Z0 if z_seed is None else float(z_seed)
    if eps ** (2 / 3) * zs >= 1:
        raise ScheduleError("seed abscissa beyond the half-line")
    t0, c0, kap = sched.t0, sched.c0, sched.kappa
    e23, e13 = eps ** (2 / 3), eps ** (1 / 3)

    def t_ii(t):
        u = t ** (2 * gamma) / (4 * beta ** 2)
        s = np.sqrt(1 - u + 0j)
        r = t ** gamma / (2 * beta)
        return np.array([[1, 1], [r / (1 + s), r / (1 - s)]], dtype=complex)

    def t_iv(t):
        u = t ** (2 * gamma) / (4 * beta ** 2)
        s = np.sqrt(u - 1 + 0j)
        r = t ** gamma / (2 * beta)
        return np.array([[1, 1], [r / (1 - 1j * s), r / (1 + 1j * s)]], dtype=complex)

    def mz_ii(z):
        lam = -c0 * math.sqrt(z) / (1 - e23 * z) ** kap
        q = e13 * math.sqrt(z)
        s = -1 / (4 * z * (1 - e23 * z)) * np.array([[1 - q, -1 - q], [-1 + q, 1 + q]])
        return np.diag([lam, -lam]) + s

    def mz_iv(z):
        r = math.sqrt(-z)
        lam = 1j * c0 * r / (1 - e23 * z) ** kap
        q = 1j * e13 * r
        s = -1 / (4 * z * (1 - e23 * z)) * np.array([[1 + q, -1 + q], [-1 - q, 1 - q]])
        return np.diag([lam, -lam]) + s

    def seed(mz, z, amps):
        m = mz(z)
        w, v = np.linalg.eig(m)
        cols = []
        for idx, amp in enumerate(amps):
            j = np.argmin(np.abs(w - m[idx, idx]))
            cols.append(amp * v[:, j] / v[idx, j])
        return np.array(cols).T

    p = 2 * c0 / 3 * Z0 ** 1.5
    a_ii = [math.exp(-p) * Z0 ** -0.25 * np.exp(_cquad(lambda s: mz_ii(s)[0, 0], Z0, zs)),
            math.exp(p) * Z0 ** -0.25 * np.exp(_cquad(lambda s: mz_ii(s)[1, 1], Z0, zs))]
    a_iv = [np.exp(-1j * p) * Z0 ** -0.25 * np.exp(-_cquad(lambda s: mz_iv(s)[0, 0], -zs, -Z0)),
            np.exp(1j * p) * Z0 ** -0.25 * np.exp(-_cquad(lambda s: mz_iv(s)[1, 1], -zs, -Z0))]
    t1 = float(z_unmap(zs, eps, beta, gamma))
    t2 = float(z_unmap(-zs, eps, beta, gamma))
    u_ii = t_ii(t1) @ seed(mz_ii, zs, a_ii)
    u_iv = t_iv(t2) @ seed(mz_iv, -zs, a_iv)

    def fun(t, y):
        b = beta * t ** (-gamma)
        u = y.reshape(2, 2)
        m = np.array([[b, -0.5], [0.5, -b]]) / eps
        return (m @ u).ravel()

    traj = integrate_ivp(fun, (t1, t2), u_ii.ravel(), tol=tol, max_step=eps)
    d = np.linalg.solve(u_iv, traj.terminal.reshape(2, 2))
    det = abs(np.linalg.det(d))
    col = d[:, 0]
    return ConnectionReport(
        float(eps), d,
        float(np.linalg.norm(col - COL1_TARGET) / np.linalg.norm(COL1_TARGET)),
        abs(det - DET_TARGET) / DET_TARGET,
        float(np.linalg.norm(col - COL1_LIMIT) / np.linalg.norm(COL1_LIMIT)),
        abs(det - DET_LIMIT) / DET_LIMIT,
        sched)
