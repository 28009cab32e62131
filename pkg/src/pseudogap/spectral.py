"""Eigenfunction shooting, Jost coefficients and the spectral density near
critical points."""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .asymptotic import c_cr, c_cr_physical
from .critical import (DegenerateResonance, coupling, critical_point, detuning,
                       locate_critical, neighborhood)
from .floquet import _hill_run, band_index, bloch, EdgeProximityError
from .numkit import IntegrationError, Trajectory, TailError, tail_limit

__all__ = [
    "InsufficientData",
    "DensitySample",
    "PseudogapFit",
    "AlphaCrEstimate",
    "ScanResult",
    "integrate_eigenfunction",
    "jost_coefficient",
    "spectral_density",
    "estimate_alpha_cr",
    "sin2_law",
    "pseudogap_scan",
    "geometric_offsets",
    "EIG_TOL",
]

EIG_TOL = 1e-9
X_START = 1e-8
X_MAX_CAP = 4e6
N_PHASES = 4
N_TAIL = 16384


class InsufficientData(ValueError):
    """Too few converged samples for a fit."""


def _workers():
    try:
        return max(1, int(os.environ.get("PSEUDOGAP_THREADS", "1")))
    except ValueError:
        return 1


def _hmax(problem, lam):
    fast = max(2 * abs(problem.omega), math.sqrt(abs(lam - problem.bg.qmin)), 1.0)
    return min(problem.bg.a, 2 * math.pi / fast) / 8


def _series_start(problem, lam, y0, y1):
    """State at ``X_START`` from ``(y, y')(0) = (y0, y1)``.

    One Picard step integrates the ``c sin(delta) x^-gamma`` singularity
    exactly; the neglected terms are ``O(x^(3 - 2 gamma))``.
    """
    x, g = X_START, problem.gamma
    s = problem.c * math.sin(problem.delta)
    v0 = float(problem.bg(0.0)) - lam
    if problem.q1 is not None:
        v0 += problem.q1.c1
    y = y0 + y1 * x + s * y0 * x ** (2 - g) / ((1 - g) * (2 - g)) + 0.5 * v0 * y0 * x * x
    yp = y1 + s * y0 * x ** (1 - g) / (1 - g) + s * y1 * x ** (2 - g) / (2 - g) + v0 * y0 * x
    return y, yp


def _two_solutions(problem, lam, xs, tol=EIG_TOL):
    """``(phi_1, phi_1', phi_2, phi_2')`` at sorted ``xs`` for the boundary data
    ``alpha = pi/2`` (``phi(0) = 1``) and ``alpha = 0`` (``phi'(0) = 1``)."""
    xs = np.asarray(xs, dtype=float)
    y = np.empty(4)
    y[0], y[1] = _series_start(problem, lam, 1.0, 0.0)
    y[2], y[3] = _series_start(problem, lam, 0.0, 1.0)
    out = np.empty((xs.size, 4))
    outlog = np.empty(xs.size)
    nsteps, logacc = _kernels.dp54(0, X_START, float(xs[-1]), y, problem.kernel_params(lam),
                                   problem.bg.coef, tol, _hmax(problem, lam), xs, out, outlog)
    if nsteps < 0:
        raise IntegrationError(f"eigenfunction integration failed at lambda = {lam!r}")
    return out, outlog, nsteps


def integrate_eigenfunction(problem, lam, x_max, xs=None, tol=EIG_TOL):
    """``(phi, phi')`` for ``phi(0) = sin(alpha)``, ``phi'(0) = cos(alpha)``."""
    if xs is None:
        xs = np.linspace(0.0, x_max, 2001)
    xs = np.asarray(xs, dtype=float)
    if np.any(np.diff(xs) <= 0) or xs[0] < 0:
        raise ValueError("xs must be increasing and nonnegative")
    inner = xs[xs >= X_START]
    out, outlog, nsteps = _two_solutions(problem, lam, inner, tol)
    sa, ca = math.sin(problem.alpha), math.cos(problem.alpha)
    states = np.empty((xs.size, 2))
    logs = np.zeros(xs.size)
    n0 = xs.size - inner.size
    # below X_START the two-term start is used directly
    for i in range(n0):
        y1 = _series_start(problem, lam, 1.0, 0.0) if xs[i] > 0 else (1.0, 0.0)
        y2 = _series_start(problem, lam, 0.0, 1.0) if xs[i] > 0 else (0.0, 1.0)
        states[i] = [sa * y1[0] + ca * y2[0], sa * y1[1] + ca * y2[1]]
    states[n0:, 0] = sa * out[:, 0] + ca * out[:, 2]
    states[n0:, 1] = sa * out[:, 1] + ca * out[:, 3]
    logs[n0:] = outlog
    return Trajectory(xs, states, states[-1].copy(), logs, float(logs[-1]), nsteps)


def _tail_grid(a, x_max, n=N_TAIL, phases=N_PHASES):
    """Tail window ``[x_max/2, x_max]`` sampled at ``m a + r`` with fixed
    in-cell phases ``r``, so the Bloch solution is known exactly there."""
    m_lo, m_hi = math.ceil(0.5 * x_max / a), math.floor(x_max / a) - 1
    m = np.unique(np.linspace(m_lo, m_hi, max(n // phases, 8)).round().astype(np.int64))
    r = (np.arange(phases) + 0.5) * (a / phases)
    x = (m[:, None] * a + r[None, :]).ravel()
    return x, np.repeat(m, phases), np.tile(np.arange(phases), m.size), r


def _bloch_on_grid(bd, m, idx, r):
    out = _hill_run(bd.bg, bd.lam, np.append(r, bd.bg.a))[:-1]
    s0, s1 = bd.psi_plus_seed
    val = s0 * out[:, 0] + s1 * out[:, 2]
    der = s0 * out[:, 1] + s1 * out[:, 3]
    phase = np.exp(1j * bd.k * m)
    return val[idx] * phase, der[idx] * phase


def _jost_samples(problem, bd, lam, x_max, tol):
    """Pointwise ``A(x) = W{phi, psi+}/W{psi-, psi+}`` for the two base solutions."""
    x, m, idx, r = _tail_grid(problem.bg.a, x_max)
    out, outlog, nsteps = _two_solutions(problem, lam, x, tol)
    pv, pd = _bloch_on_grid(bd, m, idx, r)
    w = -bd.wronskian  # W{psi-, psi+}
    scale = np.exp(outlog)
    a1 = (out[:, 1] * pv - out[:, 0] * pd) * scale / w
    a2 = (out[:, 3] * pv - out[:, 2] * pd) * scale / w
    return x, a1, a2, nsteps


@dataclass
class _Resonance:
    z: complex
    rate: float
    gamma: float

    def frame(self, x):
        e = 0.5 * self.rate
        b = abs(self.z) * x ** (-self.gamma)
        psi = self.rate * x + np.angle(self.z)
        return e, b, psi


def _polar_invariant(res, x, p, q):
    """Polarized adiabatic invariant of ``A' = z x^-gamma exp(i rate x) conj(A)``;
    reduces to ``Re(p conj(q))`` when the coupling vanishes."""
    if res is None or res.z == 0:
        return np.real(p * np.conj(q))
    e, b, psi = res.frame(x)
    mu = np.sqrt(e * e - b * b)
    return np.sign(e) * (e * np.real(p * np.conj(q)) + b * np.imag(p * q * np.exp(-1j * psi))) / mu


@dataclass
class DensitySample:
    lam: float
    A_alpha: complex
    rho_prime: float
    tail_error: float
    x_max_used: float
    converged: bool = True
    alpha: float = 0.0
    gram: np.ndarray = field(default=None, repr=False)
    wronskian_abs: float = float("nan")

    def rho_at(self, alpha):
        v = np.array([math.sin(alpha), math.cos(alpha)])
        return 1.0 / (2 * math.pi * self.wronskian_abs * float(v @ self.gram @ v))


def _nearest_resonance(problem, bands, lam, crit=None):
    if crit is None:
        j = band_index(bands, lam)
        best = None
        for sign in ("+", "-"):
            try:
                cand = critical_point(problem, bands, j, sign)
            except DegenerateResonance:
                continue
            if best is None or abs(cand.nu - lam) < abs(best.nu - lam):
                best = cand
        crit = best
    return crit


def _x_max_for(problem, rate, beta, x_max=None, cap=X_MAX_CAP):
    if x_max is not None:
        return float(x_max)
    g = problem.gamma
    if problem.c == 0 and (problem.q1 is None or problem.q1.c1 == 0):
        # the Wronskian estimator is exact for the periodic problem
        return max(256 * problem.bg.a, 256.0)
    if rate == 0:
        return min(1e5, cap)
    x = max(10 * abs(rate) ** (-1 / g), 1e5)
    if beta > 0:
        x = max(x, 8 * (2 * beta / abs(rate)) ** (1 / g))
    return min(x, cap)


def jost_coefficient(problem, bd, lam, x_max=None, crit=None, bands=None, tol=EIG_TOL,
                     cap=X_MAX_CAP):
    """Jost coefficient data at ``lam``.

    Returns ``(A_alpha, tail_error, gram, x_max, converged)`` where ``gram``
    holds the limits of the polarized invariant for the two base solutions,
    so that ``|A_alpha|^2 = (sin a, cos a) gram (sin a, cos a)^T``.
    """
    res = None
    rate = 0.0
    if crit is not None and problem.c != 0:
        if bands is None:
            raise ValueError("bands are required with a critical point")
        rate = detuning(problem, bands, crit, lam)
        res = _Resonance(coupling(problem, crit, bd), rate, problem.gamma)
    beta = abs(res.z) if res is not None else 0.0
    x_max = _x_max_for(problem, rate, beta, x_max, cap)
    x, a1, a2, _ = _jost_samples(problem, bd, lam, x_max, tol)
    if res is not None:
        e, b, _ = res.frame(x)
        if np.any(b >= abs(e)):
            raise TailError("tail window does not clear the resonance turning point")
    period = max(2 * math.pi / abs(rate), problem.bg.a) if rate != 0 else problem.bg.a
    # far from nu_cr the non-resonant harmonics beat against a short window;
    # a whole number of detuning periods spanning 64 lattice periods damps them
    if problem.c != 0 and period < 64 * problem.bg.a:
        period *= math.ceil(64 * problem.bg.a / period)
    period = min(period, (x[-1] - x[0]) / 8)
    p = 1 - 2 * problem.gamma
    ests = [tail_limit(x, _polar_invariant(res, x, u, v), period, decay_exponent=p)
            for u, v in ((a1, a1), (a1, a2), (a2, a2))]
    gram = np.array([[ests[0].value, ests[1].value], [ests[1].value, ests[2].value]], dtype=float)
    sa, ca = math.sin(problem.alpha), math.cos(problem.alpha)
    vec = np.array([sa, ca])
    inv = float(vec @ gram @ vec)
    err = (sa * sa * ests[0].error_bar + 2 * abs(sa * ca) * ests[1].error_bar
           + ca * ca * ests[2].error_bar)
    converged = all(e.converged for e in ests) and inv > 0
    # amplitude in the first-order normal form at the last sample, scaled to the invariant
    a_end = sa * a1[-1] + ca * a2[-1]
    if res is not None:
        e, b, psi = res.frame(x[-1])
        a_end = a_end + 1j * b / (2 * e) * np.exp(1j * psi) * np.conj(a_end)
    A = a_end / abs(a_end) * math.sqrt(max(inv, 0.0))
    return complex(A), err / max(abs(inv), 1e-300), gram, x_max, converged


def spectral_density(problem, lam, bands, crit=None, x_max=None, rescale=None, tol=EIG_TOL,
                     cap=X_MAX_CAP):
    """``rho'(lam) = 1/(2 pi |W| |A_alpha|^2)`` at an in-band energy."""
    bd = bloch(problem.bg, bands, lam, rescale=rescale)
    crit = _nearest_resonance(problem, bands, lam, crit) if problem.c != 0 else None
    if crit is not None:
        crit = crit if not math.isnan(crit.beta_cr) else critical_point(problem, bands, crit.j, crit.sign)
        if crit.j != bd.band:
            crit = None
    A, err, gram, xm, conv = jost_coefficient(problem, bd, lam, x_max, crit, bands, tol, cap)
    w = abs(bd.wronskian)
    inv = abs(A) ** 2
    rho = 1.0 / (2 * math.pi * w * inv) if inv > 0 else float("inf")
    return DensitySample(float(lam), A, rho, err, xm, conv and rho > 0, problem.alpha, gram, w)


@dataclass
class AlphaCrEstimate:
    alpha_cr: float
    growth_A: float
    growth_B: float
    residual: float
    error_bar: float = 0.0

    def growth(self, alpha):
        return self.growth_A * math.sin(alpha) + self.growth_B * math.cos(alpha)


def estimate_alpha_cr(problem, bands, crit, x_max=1e5, tol=EIG_TOL):
    """Boundary angle of the subordinate solution at ``nu_cr``.

    At ``nu_cr`` the Jost amplitude of either base solution grows like
    ``exp(beta_cr x^(1-gamma)/(1-gamma))`` along ``exp(i arg(z)/2)``; the
    envelope-normalized projections on that direction give ``G(alpha)``.
    """
    if math.isnan(crit.beta_cr):
        crit = critical_point(problem, bands, crit.j, crit.sign)
    bd = bloch(problem.bg, bands, crit.nu)
    z = coupling(problem, crit, bd)
    x, a1, a2, _ = _jost_samples(problem, bd, crit.nu, x_max, tol)
    g = problem.gamma
    env = np.exp(-abs(z) * x ** (1 - g) / (1 - g))
    rot = np.exp(-0.5j * np.angle(z))
    ests = [tail_limit(x, env * np.real(rot * u), problem.bg.a * math.ceil(64 / problem.bg.a),
                       decay_exponent=1 - 2 * g) for u in (a1, a2)]
    ga, gb = float(ests[0].value), float(ests[1].value)
    scale = max(abs(ga), abs(gb))
    if scale < 1e-12:
        raise DegenerateResonance("growth coefficients vanish: no resonant growth at nu_cr")
    acr = math.atan2(-gb, ga) % math.pi
    resid = abs(ga * math.sin(acr) + gb * math.cos(acr)) / scale
    err = max(ests[0].error_bar, ests[1].error_bar) / scale
    return AlphaCrEstimate(acr, ga, gb, resid, err)


def sin2_law(sample, alpha_cr, k_range=range(1, 8)):
    """Spread of ``rho'_alpha sin^2(alpha - alpha_cr)`` over ``alpha_cr + k pi/8``,
    and the angle minimizing ``|A_alpha|`` at the sample energy."""
    vals = np.array([sample.rho_at(alpha_cr + k * math.pi / 8) * math.sin(k * math.pi / 8) ** 2
                     for k in k_range])
    spread = float((vals.max() - vals.min()) / vals.mean())
    w, v = np.linalg.eigh(sample.gram)
    amin = math.atan2(v[0, 0], v[1, 0]) % math.pi
    return spread, amin, vals


@dataclass
class PseudogapFit:
    side: str
    points: list
    slope: float
    slope_err: float
    slope_target: float
    rel_dev: float
    slope_target_physical: float = float("nan")
    rel_dev_physical: float = float("nan")


@dataclass
class ScanResult:
    crit: object
    alpha: float
    samples: list
    fits: dict
    excluded: list


def geometric_offsets(lo, hi, per_decade=4):
    n = int(round(math.log10(hi / lo) * per_decade)) + 1
    return np.geomspace(lo, hi, max(n, 2))


def _fit(side, pts, gamma, target, target_phys):
    if len(pts) < 5:
        raise InsufficientData(f"fit on side {side!r} needs at least 5 converged samples, got {len(pts)}")
    off = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    s = off ** (-(1 - gamma) / gamma)
    basis = np.column_stack([s, np.ones_like(s)])
    coef, res, *_ = np.linalg.lstsq(basis, y, rcond=None)
    dof = max(len(pts) - 2, 1)
    r = y - basis @ coef
    cov = np.linalg.inv(basis.T @ basis) * float(r @ r) / dof
    slope = float(coef[0])
    return PseudogapFit(side, [tuple(p) for p in pts], slope, float(math.sqrt(cov[0, 0])), target,
                        abs(slope - target) / abs(target), target_phys,
                        abs(slope - target_phys) / abs(target_phys))


def pseudogap_scan(problem, bands, crit, offsets, sides=("above", "below"), tol=EIG_TOL,
                   cap=X_MAX_CAP, alpha_cr=None, min_separation=0.1):
    """Spectral density on both sides of ``nu_cr`` and fits of ``ln rho'`` against
    ``|lambda - nu|^(-(1-gamma)/gamma)``."""
    if math.isnan(crit.beta_cr):
        crit = critical_point(problem, bands, crit.j, crit.sign)
    if alpha_cr is not None:
        d = abs(math.remainder(problem.alpha - alpha_cr, math.pi))
        if d < min_separation:
            raise ValueError("alpha is within 0.1 rad of alpha_cr")
    lo, hi = neighborhood(problem, bands, crit)
    jobs = []
    for side in sides:
        sgn = 1.0 if side == "above" else -1.0
        for off in offsets:
            lam = crit.nu + sgn * off
            if not lo < lam < hi:
                raise ValueError(f"offset {off!r} leaves the guarded neighbourhood of nu_cr")
            jobs.append((side, float(off), lam))

    def run(job):
        side, off, lam = job
        try:
            return side, off, spectral_density(problem, lam, bands, crit, tol=tol, cap=cap)
        except (TailError, IntegrationError, EdgeProximityError) as exc:
            return side, off, exc

    with ThreadPoolExecutor(max_workers=_workers()) as pool:
        results = list(pool.map(run, jobs))
    a = problem.bg.a
    target = -2 * c_cr(crit, a)
    target_phys = -2 * c_cr_physical(crit, a)
    samples, excluded, fits = [], [], {}
    for side in sides:
        pts = []
        for s, off, smp in results:
            if s != side:
                continue
            if isinstance(smp, Exception) or not smp.converged:
                excluded.append((s, off, smp))
                continue
            samples.append((s, off, smp))
            pts.append((off, math.log(smp.rho_prime)))
        fits[side] = _fit(side, pts, problem.gamma, target, target_phys)
    return ScanResult(crit, problem.alpha, samples, fits, excluded)
