"""Shared numerical substrate.

Adaptive Dormand-Prince integration of linear fields, adaptive and
principal-value quadrature, log-gamma/beta/Airy special functions and the
extraction of limits from slowly converging oscillatory tails.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

__all__ = [
    "IntegrationError",
    "StepSizeUnderflow",
    "NonFiniteState",
    "QuadratureError",
    "AiryRangeError",
    "TailError",
    "Trajectory",
    "LimitEstimate",
    "integrate_ivp",
    "quad_adaptive",
    "quad_pv",
    "log_gamma",
    "beta_fn",
    "airy_pair",
    "tail_limit",
]


class IntegrationError(RuntimeError):
    """Base class for ODE integration failures."""


class StepSizeUnderflow(IntegrationError):
    def __init__(self, x):
        super().__init__(f"step size underflow at x = {x!r}")
        self.x = x


class NonFiniteState(IntegrationError):
    def __init__(self, x):
        super().__init__(f"non-finite state at x = {x!r}")
        self.x = x


class QuadratureError(RuntimeError):
    pass


class AiryRangeError(ValueError):
    pass


class TailError(ValueError):
    pass


@dataclass
class Trajectory:
    """Sampled solution of a linear ODE.

    ``states[i] * exp(log_scale[i])`` is the solution at ``abscissae[i]``;
    the log scale is nonzero only when renormalization was requested.
    """

    abscissae: np.ndarray
    states: np.ndarray
    terminal: np.ndarray
    log_scale: np.ndarray
    terminal_log_scale: float = 0.0
    nsteps: int = 0

    def unscaled(self):
        return self.states * np.exp(self.log_scale)[:, None]


@dataclass
class LimitEstimate:
    value: complex
    error_bar: float
    window_used: tuple
    converged: bool = True
    averages: np.ndarray = field(default=None, repr=False)


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])


def _hermite(x0, y0, f0, x1, y1, f1, xq):
    h = x1 - x0
    th = (xq - x0) / h
    return ((1 - th) * y0 + th * y1
            + th * (th - 1) * ((1 - 2 * th) * (y1 - y0) + (th - 1) * h * f0 + th * h * f1))


def integrate_ivp(fun, span, y0, tol=1e-10, max_step=None, carrier_frequency=None,
                  t_eval=None, renormalize_every=None, first_step=None):
    """Integrate ``y' = fun(x, y)`` over ``span`` with an adaptive 5(4) pair.

    Parameters
    ----------
    fun : callable
        Right-hand side returning an array shaped like ``y``.
    span : (x0, x1)
        Integration interval; ``x1 < x0`` integrates backwards.
    y0 : array_like
        Initial state, real or complex.
    tol : float
        Per-step relative error target in (1e-14, 1e-2].
    max_step : float, optional
        Upper bound on the step. Defaults to a twentieth of the carrier
        period when ``carrier_frequency`` is given, otherwise unbounded.
    t_eval : array_like, optional
        Output abscissae (Hermite dense output); by default every accepted
        step is returned.
    renormalize_every : int, optional
        Rescale the state to unit norm every that many steps and keep the
        logarithm of the discarded factor.
    """
    x0, x1 = float(span[0]), float(span[1])
    if not x1 != x0 or not (np.isfinite(x0) and np.isfinite(x1)):
        raise ValueError("span must be a nondegenerate finite interval")
    if not 1e-14 < tol <= 1e-2:
        raise ValueError("tol must lie in (1e-14, 1e-2]")
    y = np.array(y0, dtype=complex if np.iscomplexobj(y0) else float).ravel()
    if not np.all(np.isfinite(y)):
        raise NonFiniteState(x0)
    direction = 1.0 if x1 > x0 else -1.0
    length = abs(x1 - x0)
    if max_step is None:
        max_step = (2 * math.pi / abs(carrier_frequency) / 20
                    if carrier_frequency else length)
    max_step = min(float(max_step), length)
    if max_step <= 0:
        raise ValueError("max_step must be positive")

    if t_eval is not None:
        t_eval = np.asarray(t_eval, dtype=float)
        if np.any(direction * np.diff(t_eval) <= 0):
            raise ValueError("t_eval must be strictly monotone in the span direction")
        lo, hi = min(x0, x1), max(x0, x1)
        if t_eval.size and (t_eval.min() < lo or t_eval.max() > hi):
            raise ValueError("t_eval outside span")
        out_x = t_eval
        out_y = np.empty((t_eval.size, y.size), dtype=y.dtype)
        out_s = np.zeros(t_eval.size)
        j = 0
        while j < t_eval.size and t_eval[j] == x0:
            out_y[j] = y
            j += 1
    else:
        xs_list, ys_list, ss_list = [x0], [y.copy()], [0.0]

    x = x0
    f = np.asarray(fun(x, y))
    log_scale = 0.0
    ynorm = np.linalg.norm(y)
    if first_step is None:
        fnorm = np.linalg.norm(f)
        h = 0.01 * ynorm / fnorm if fnorm > 0 and ynorm > 0 else 1e-3 * max_step
        h = min(max(h, 1e-12 * max(abs(x0), 1.0)), max_step)
    else:
        h = min(float(first_step), max_step)
    err_old = 1e-4
    nsteps = 0
    k = [None] * 7
    while direction * (x1 - x) > 0:
        if h > abs(x1 - x):
            h = abs(x1 - x)
        if h < 1e-14 * max(abs(x), 1.0):
            raise StepSizeUnderflow(x)
        hs = direction * h
        k[0] = f
        for s in range(1, 7):
            ys = y.copy()
            for m, a in enumerate(_A[s]):
                if a:
                    ys += hs * a * k[m]
            k[s] = np.asarray(fun(x + _C[s] * hs, ys))
        y_new = ys  # stage 7 argument is the 5th-order solution (FSAL)
        err_vec = hs * sum(_E[m] * k[m] for m in range(7) if _E[m])
        scale = tol * np.maximum(np.maximum(np.abs(y), np.abs(y_new)),
                                 1e-8 * max(np.linalg.norm(y_new), 1e-300))
        err = math.sqrt(np.mean(np.abs(err_vec / scale) ** 2))
        if not np.isfinite(err):
            if not np.all(np.isfinite(y_new)):
                h *= 0.2
                if h < 1e-14 * max(abs(x), 1.0):
                    raise NonFiniteState(x)
                continue
        if err <= 1.0:
            x_new = x + hs
            if direction * (x1 - x_new) < 1e-14 * max(abs(x1), 1.0):
                x_new = x1
            f_new = k[6]
            if t_eval is not None:
                while j < out_x.size and direction * (out_x[j] - x_new) <= 0:
                    out_y[j] = _hermite(x, y, f, x_new, y_new, f_new, out_x[j])
                    out_s[j] = log_scale
                    j += 1
            x, y, f = x_new, y_new, f_new
            nsteps += 1
            if not np.all(np.isfinite(y)):
                raise NonFiniteState(x)
            if renormalize_every and nsteps % renormalize_every == 0:
                nrm = np.linalg.norm(y)
                if nrm > 0:
                    y = y / nrm
                    f = f / nrm
                    log_scale += math.log(nrm)
            if t_eval is None:
                xs_list.append(x)
                ys_list.append(y.copy())
                ss_list.append(log_scale)
            fac = 5.0 if err == 0 else 0.9 * err ** (-0.7 / 5) * err_old ** (0.4 / 5)
            fac = min(5.0, max(0.2, fac))
            err_old = max(err, 1e-4)
            h = min(max_step, h * fac)
        else:
            h *= max(0.2, 0.9 * err ** (-0.2))

    if t_eval is None:
        out_x = np.array(xs_list)
        out_y = np.array(ys_list)
        out_s = np.array(ss_list)
    return Trajectory(out_x, out_y, y.copy(), out_s, log_scale, nsteps)


def quad_adaptive(f, a, b, tol=1e-12, limit=500):
    """Adaptive Gauss-Kronrod quadrature with a relative tolerance."""
    val, err = integrate.quad(f, a, b, epsabs=1e-15, epsrel=tol, limit=limit)
    if not np.isfinite(val) or err > max(10 * tol * abs(val), 1e-13):
        raise QuadratureError(f"quadrature did not converge (estimate {val}, error {err})")
    return val


def quad_pv(f, a, b, pole, tol=1e-12):
    """Principal value of ``int_a^b f`` through a simple pole.

    ``f(t) (t - pole)`` is integrated against the Cauchy weight
    ``1/(t - pole)`` (QUADPACK ``qawc``). An infinite upper limit is split at
    ``2*pole - a`` and the remainder mapped by ``t = pole + 1/s``.
    """
    if not (a < pole and (b == np.inf or pole < b)):
        raise ValueError("pole must lie strictly inside (a, b)")
    c = b if np.isfinite(b) else 2 * pole - a
    nudge = 1e-9 * max(abs(pole), 1.0)
    residue = 0.5 * (f(pole + nudge) - f(pole - nudge)) * nudge
    if not np.isfinite(residue):
        raise QuadratureError("residue estimate is not finite")

    def numerator(t):
        # removable singularity; qawc may sample the pole itself
        if t == pole:
            return residue
        return f(t) * (t - pole)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(numerator, a, c, weight="cauchy", wvar=pole,
                                  epsabs=1e-15, epsrel=tol, limit=500)
    # a cancelling principal value is judged against the residue scale
    if not np.isfinite(val) or err > max(10 * tol * max(abs(val), abs(residue)), 1e-13):
        raise QuadratureError(f"principal value did not converge (estimate {val}, error {err})")
    if np.isfinite(b):
        return val
    s_max = 1.0 / (c - pole)
    tail = quad_adaptive(lambda s: f(pole + 1.0 / s) / (s * s) if s > 0 else 0.0, 0.0, s_max, tol)
    return val + tail


def log_gamma(x):
    if not x > 0:
        raise ValueError("log_gamma requires a positive argument")
    return math.lgamma(x)


def beta_fn(p, q):
    if not (p > 0 and q > 0):
        raise ValueError("beta_fn requires positive arguments")
    lo, hi = (p, q) if p <= q else (q, p)
    return math.exp(log_gamma(lo) + log_gamma(hi) - log_gamma(lo + hi))


def airy_pair(z):
    """Return ``(Ai, Bi, Ai', Bi')`` at a real argument with |z| <= 50."""
    z = np.asarray(z, dtype=float)
    if np.any(~np.isfinite(z)) or np.any(np.abs(z) > 50):
        raise AiryRangeError("airy_pair is limited to |z| <= 50")
    ai, aip, bi, bip = special.airy(z)
    if ai.ndim == 0:
        return float(ai), float(bi), float(aip), float(bip)
    return ai, bi, aip, bip


def _window_averages(x, v, period):
    F = integrate.cumulative_trapezoid(v, x, initial=0.0)
    step = period / 2
    starts = np.arange(x[0], x[-1] - period + 1e-12 * abs(x[-1]), step)
    lo = np.interp(starts, x, F.real) + (1j * np.interp(starts, x, F.imag) if np.iscomplexobj(F) else 0)
    hi = (np.interp(starts + period, x, F.real)
          + (1j * np.interp(starts + period, x, F.imag) if np.iscomplexobj(F) else 0))
    return starts + period / 2, (hi - lo) / period


def tail_limit(x, values, period, decay_exponent=0.0, min_periods=8):
    """Limit of an oscillating, slowly drifting tail.

    Period averages over half-overlapping windows remove the oscillation;
    the drift ``L + C x**decay_exponent`` is then eliminated by least
    squares (a one-step Richardson elimination over all windows). The error
    bar combines the spread of the last three averages, the intercept's
    standard error and the residual jitter of the last quarter; residuals in
    the tail half exceeding three error bars mark the estimate unconverged.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(values)
    if x.ndim != 1 or x.size != v.size or x.size < 3:
        raise TailError("need matching one-dimensional samples")
    if np.any(np.diff(x) <= 0):
        raise TailError("abscissae must be strictly increasing")
    if not period > 0:
        raise TailError("period must be positive")
    if x[-1] - x[0] < min_periods * period:
        raise TailError(f"window [{x[0]}, {x[-1]}] spans fewer than {min_periods} periods")
    centers, avg = _window_averages(x, v, period)
    if decay_exponent == 0.0:
        basis = np.ones((avg.size, 1))
    else:
        # window average of x**p, so the drift model is exact for power laws
        p, lo, hi = decay_exponent, centers - period / 2, centers + period / 2
        if abs(p + 1) < 1e-12:
            drift = np.log(hi / lo) / period
        else:
            drift = (hi ** (p + 1) - lo ** (p + 1)) / ((p + 1) * period)
        basis = np.column_stack([np.ones_like(centers), drift])
    coef = np.linalg.lstsq(basis, avg.real, rcond=None)[0].astype(avg.dtype)
    if np.iscomplexobj(avg):
        coef = coef + 1j * np.linalg.lstsq(basis, avg.imag, rcond=None)[0]
    value = coef[0]
    model = basis @ coef
    resid = np.abs(avg - model)
    # standard error of the extrapolated intercept
    dof = avg.size - basis.shape[1]
    if dof > 0:
        s2 = float(np.sum(resid ** 2)) / dof
        se = math.sqrt(s2 * np.linalg.inv(basis.T @ basis)[0, 0])
    else:
        se = 0.0
    last = avg[-3:] - (model[-3:] - value)
    spread = float(np.max(np.abs(last - last.mean()))) if avg.size >= 3 else 0.0
    # incommensurate harmonics leave a bounded jitter in the averages
    jitter = float(np.sqrt(np.mean(resid[-max(avg.size // 4, 1):] ** 2)))
    error_bar = max(2 * spread, 2 * se, jitter)
    floor = 1e-12 * max(abs(value), 1e-300)
    tail = resid[avg.size // 2:]
    converged = bool(np.max(tail) <= 3 * error_bar + 10 * floor) and bool(np.isfinite(value))
    return LimitEstimate(value.item() if hasattr(value, "item") else value, error_bar,
                         (float(x[0]), float(x[-1])), converged, avg)
