"""Floquet and Bloch analysis of the periodic background."""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.interpolate import CubicSpline

from . import _kernels

__all__ = [
    "FloquetError",
    "EdgeProximityError",
    "PeriodicBackground",
    "BandStructure",
    "BlochData",
    "monodromy",
    "monodromy_derivative",
    "discriminant",
    "band_edges",
    "band_index",
    "quasimomentum",
    "bloch",
    "psi_plus",
    "fourier_bn_plus",
    "HILL_TOL",
]

HILL_TOL = 1e-13
EDGE_GUARD = 1e-6


class FloquetError(RuntimeError):
    pass


class EdgeProximityError(FloquetError, ValueError):
    """Energy lies in a gap, on an edge, or within the near-edge guard."""


@dataclass(frozen=True, eq=False)
class PeriodicBackground:
    """Periodic potential ``q`` of period ``a``.

    Internally ``q`` is a periodic cubic table on a uniform grid; constants
    are represented exactly, callbacks and samples through a periodic cubic
    spline. Every routine in the package uses this single representation.
    """

    a: float
    coef: np.ndarray = field(repr=False)
    kind: str = "constant"
    v0: float = 0.0
    source: object = field(default=None, repr=False)

    def __post_init__(self):
        if not (np.isfinite(self.a) and self.a > 0):
            raise ValueError("period a must be positive")

    @classmethod
    def free(cls, a=1.0):
        return cls.constant(0.0, a)

    @classmethod
    def constant(cls, v0, a=1.0):
        coef = np.array([[float(v0), 0.0, 0.0, 0.0]])
        return cls(float(a), coef, "constant", float(v0))

    @classmethod
    def from_samples(cls, values, a):
        """Uniform samples of one period, ``values[i] = q(i*a/n)``."""
        values = np.asarray(values, dtype=float).ravel()
        if values.size < 4 or not np.all(np.isfinite(values)):
            raise ValueError("need at least 4 finite samples")
        n = values.size
        x = np.linspace(0.0, a, n + 1)
        y = np.append(values, values[0])
        cs = CubicSpline(x, y, bc_type="periodic")
        coef = np.ascontiguousarray(cs.c[::-1].T[:n])
        return cls(float(a), coef, "sampled", float(values.mean()), values)

    @classmethod
    def from_callable(cls, q, a, n=1024):
        x = np.arange(n) * (a / n)
        bg = cls.from_samples(np.asarray([q(t) for t in x], dtype=float), a)
        object.__setattr__(bg, "kind", "callable")
        object.__setattr__(bg, "source", q)
        return bg

    @property
    def h(self):
        return self.a / self.coef.shape[0]

    @property
    def qmin(self):
        if self.kind == "constant":
            return self.v0
        x = np.linspace(0.0, self.a, 8 * self.coef.shape[0], endpoint=False)
        return float(np.min(self(x)))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        xm = np.mod(x, self.a)
        i = np.minimum((xm / self.h).astype(int), self.coef.shape[0] - 1)
        d = xm - i * self.h
        c = self.coef[i]
        return c[..., 0] + d * (c[..., 1] + d * (c[..., 2] + d * c[..., 3]))

    def kernel_params(self, lam, c=0.0, omega=0.0, delta=0.0, gamma=0.75, c1=0.0, alpha1=0.0):
        return np.array([lam, self.a, self.h, c, omega, delta, gamma, c1, alpha1], dtype=float)


def _hill_run(bg, lam, xs, tol=HILL_TOL, with_derivative=False, y0=None):
    mode = 1 if with_derivative else 0
    n = 8 if with_derivative else 4
    y = np.zeros(n)
    if y0 is None:
        y[0] = 1.0
        y[3] = 1.0
    else:
        y[: len(y0)] = y0
    xs = np.asarray(xs, dtype=float)
    out = np.empty((xs.size, n))
    outlog = np.empty(xs.size)
    omega = math.sqrt(abs(lam - bg.qmin)) + 1.0
    hmax = min(bg.a, 2 * math.pi / omega) / 8
    nsteps, _ = _kernels.dp54(mode, 0.0, float(xs[-1]), y, bg.kernel_params(lam), bg.coef,
                              tol, hmax, xs, out, outlog)
    if nsteps < 0:
        raise FloquetError(f"Hill integration failed at lambda = {lam!r}")
    return out


def monodromy(bg, lam):
    """One-period transfer matrix in the ``(psi, psi')`` basis."""
    if not np.isfinite(lam):
        raise ValueError("lambda must be finite")
    if bg.kind == "constant":
        return _constant_monodromy(bg, lam)[0]
    out = _hill_run(bg, lam, [bg.a])[0]
    return np.array([[out[0], out[2]], [out[1], out[3]]])


def _constant_monodromy(bg, lam):
    e = lam - bg.v0
    a = bg.a
    if e > 0:
        s = math.sqrt(e)
        c, sn = math.cos(a * s), math.sin(a * s)
        M = np.array([[c, sn / s], [-s * sn, c]])
        dM = np.array([[-a * sn / (2 * s), (a * c / s - sn / s ** 2) / (2 * s)],
                       [-(sn + a * s * c) / (2 * s), -a * sn / (2 * s)]])
    elif e < 0:
        s = math.sqrt(-e)
        c, sh = math.cosh(a * s), math.sinh(a * s)
        M = np.array([[c, sh / s], [s * sh, c]])
        dM = np.array([[-a * sh / (2 * s), -(a * c / s - sh / s ** 2) / (2 * s)],
                       [-(sh + a * s * c) / (2 * s), -a * sh / (2 * s)]])
    else:
        M = np.array([[1.0, a], [0.0, 1.0]])
        dM = np.array([[-a * a / 2, -a ** 3 / 6], [-a, -a * a / 2]])
    return M, dM


def monodromy_derivative(bg, lam):
    """Monodromy matrix and its lambda-derivative."""
    if bg.kind == "constant":
        return _constant_monodromy(bg, lam)
    out = _hill_run(bg, lam, [bg.a], with_derivative=True)[0]
    M = np.array([[out[0], out[2]], [out[1], out[3]]])
    dM = np.array([[out[4], out[6]], [out[5], out[7]]])
    return M, dM


def discriminant(bg, lam):
    return float(np.trace(monodromy(bg, lam)))


def _dprime(bg, lam):
    return float(np.trace(monodromy_derivative(bg, lam)[1]))


@dataclass(frozen=True)
class BandStructure:
    """Band edges ``lower[j] <= upper[j]`` of bands ``j = 0..j_max``.

    ``edges`` lists them in the order lambda_0, mu_0, mu_1, lambda_1, ... and
    ``branch_offsets[j] = j*pi`` is the quasimomentum at the lower edge.
    """

    bg: PeriodicBackground = field(repr=False)
    lower: np.ndarray
    upper: np.ndarray
    extrema: np.ndarray = field(repr=False)

    @property
    def edges(self):
        return np.column_stack([self.lower, self.upper]).ravel()

    @property
    def bands(self):
        return [(j, float(lo), float(hi)) for j, (lo, hi) in enumerate(zip(self.lower, self.upper))]

    @property
    def branch_offsets(self):
        return np.pi * np.arange(self.lower.size)

    @property
    def j_max(self):
        return self.lower.size - 1


def band_edges(bg, j_max, step=None, root_tol=1e-10):
    """Band edges of bands ``0..j_max``.

    Local extrema of the discriminant are bracketed on a coarse grid (sign
    changes of ``D'``) and refined as roots of ``D'``; band ``j`` is the
    monotone piece of ``D`` between extrema ``j-1`` and ``j``, whose edges
    solve ``D = +-2``. An extremum with ``|D| = 2`` within tolerance is a
    pair of touching edges.
    """
    if int(j_max) != j_max or j_max < 0:
        raise ValueError("j_max must be a nonnegative integer")
    j_max = int(j_max)
    scale = (math.pi / bg.a) ** 2
    step = 0.05 * scale if step is None else step
    lam = bg.qmin - 0.2 * scale
    if not (discriminant(bg, lam) > 2 and _dprime(bg, lam) < 0):
        raise FloquetError("failed to start the band scan below the spectrum")
    extrema = []
    d_prev = _dprime(bg, lam)
    lam_limit = bg.qmin + ((j_max + 3) ** 2 + 10) * scale + 10 * abs(bg.qmin)
    while len(extrema) < j_max + 1:
        lam_next = lam + step
        if lam_next > lam_limit:
            raise FloquetError("bracketing failure: scan resolution insufficient")
        d_next = _dprime(bg, lam_next)
        if d_prev == 0.0:
            extrema.append(lam)
        elif d_prev * d_next < 0:
            extrema.append(optimize.brentq(lambda t: _dprime(bg, t), lam, lam_next,
                                           xtol=1e-14 * max(1.0, abs(lam)), rtol=1e-15))
        lam, d_prev = lam_next, d_next
    extrema = np.array(extrema)

    # |D| <= 2 at an extremum (up to rounding) means touching bands
    touching = [abs(discriminant(bg, e)) <= 2.0 + 1e-12 for e in extrema]
    lower, upper = [], []
    left = bg.qmin - 0.2 * scale
    for j in range(j_max + 1):
        right = extrema[j]
        lo_target, hi_target = (2.0, -2.0) if j % 2 == 0 else (-2.0, 2.0)
        if j > 0 and touching[j - 1]:
            lower.append(left)
        else:
            lower.append(optimize.brentq(lambda t: discriminant(bg, t) - lo_target, left, right,
                                         xtol=root_tol * 1e-2 * max(1.0, abs(right)), rtol=1e-15))
        if touching[j]:
            upper.append(right)
        else:
            upper.append(optimize.brentq(lambda t: discriminant(bg, t) - hi_target, left, right,
                                         xtol=root_tol * 1e-2 * max(1.0, abs(right)), rtol=1e-15))
        left = right
    return BandStructure(bg, np.array(lower), np.array(upper), extrema)


def band_index(bands, lam):
    for j, lo, hi in bands.bands:
        if lo < lam < hi:
            return j
    raise EdgeProximityError(f"lambda = {lam!r} is not inside a computed band")


def _k_raw(bg, j, lam):
    D = discriminant(bg, lam)
    if abs(D) > 2.0 - EDGE_GUARD:
        raise EdgeProximityError(f"lambda = {lam!r} is within the near-edge guard (|D| = {abs(D)!r})")
    base = math.acos(D / 2.0)
    return j * math.pi + base if j % 2 == 0 else (j + 1) * math.pi - base


def quasimomentum(bg, bands, lam):
    """Quasimomentum ``k(lambda)`` on the increasing branch and ``dk/dlambda``."""
    j = band_index(bands, lam)
    width = bands.upper[j] - bands.lower[j]
    h = 1e-6 * width
    k = _k_raw(bg, j, lam)
    kp = (_k_raw(bg, j, lam + h) - _k_raw(bg, j, lam - h)) / (2 * h)
    return k, kp


@dataclass(frozen=True)
class BlochData:
    lam: float
    k: float
    psi_plus_seed: np.ndarray
    wronskian: complex
    kprime: float
    band: int
    bg: PeriodicBackground = field(repr=False)

    @property
    def psi_minus_seed(self):
        return np.conj(self.psi_plus_seed)


def bloch(bg, bands, lam, rescale=None):
    """Bloch data at an in-band energy.

    The seed is the monodromy eigenvector for ``exp(i k)`` normalized by its
    first nonzero component, then multiplied by ``rescale`` when given.
    """
    k, kp = quasimomentum(bg, bands, lam)
    j = band_index(bands, lam)
    M = monodromy(bg, lam)
    mu = complex(math.cos(k), math.sin(k))
    v1 = np.array([M[0, 1], mu - M[0, 0]], dtype=complex)
    v2 = np.array([mu - M[1, 1], M[1, 0]], dtype=complex)
    v = v1 if np.linalg.norm(v1) >= np.linalg.norm(v2) else v2
    if np.linalg.norm(v) < 1e-12:
        raise EdgeProximityError("eigenvector degeneracy: lambda too close to a band edge")
    v = v / (v[0] if abs(v[0]) > 1e-14 * np.linalg.norm(v) else v[1])
    if rescale is not None:
        v = v * complex(rescale)
    W = v[1] * np.conj(v[0]) - v[0] * np.conj(v[1])
    if W.imag <= 0:
        raise FloquetError("Bloch normalization failed: Im W <= 0 on the increasing branch")
    return BlochData(float(lam), k, v, complex(W), kp, j, bg)


def psi_plus(bd, x):
    """Values and derivatives of the Bloch solution at points ``x >= 0``."""
    bg = bd.bg
    x = np.atleast_1d(np.asarray(x, dtype=float))
    m = np.floor(x / bg.a)
    r = x - m * bg.a
    order = np.argsort(r)
    rs = r[order]
    uniq, inv = np.unique(rs, return_inverse=True)
    grid = np.append(uniq, bg.a) if uniq[-1] < bg.a else uniq
    out = _hill_run(bg, bd.lam, np.maximum(grid, 0.0))[: uniq.size]
    c, cp, s, sp = out[:, 0], out[:, 1], out[:, 2], out[:, 3]
    s0, s1 = bd.psi_plus_seed
    val = np.empty(x.size, dtype=complex)
    der = np.empty(x.size, dtype=complex)
    val[order] = (s0 * c + s1 * s)[inv]
    der[order] = (s0 * cp + s1 * sp)[inv]
    phase = np.exp(1j * bd.k * m)
    return val * phase, der * phase


def _period_grid(bg, n):
    return np.arange(n) * (bg.a / n)


def fourier_bn_plus(bd, n, npts=512):
    """``b_n^+ = (1/a) int_0^a psi_+^2 exp(-2i(k + pi n)t/a) dt``.

    The integrand is periodic and smooth, so the trapezoidal rule on a
    uniform grid converges spectrally.
    """
    bg = bd.bg
    t = _period_grid(bg, npts)
    val, _ = psi_plus(bd, t)
    integrand = val ** 2 * np.exp(-2j * (bd.k + math.pi * n) * t / bg.a)
    return complex(integrand.mean())
