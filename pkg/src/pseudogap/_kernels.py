"""Compiled Dormand-Prince kernels for the Hill and perturbed equations.

Two modes share one stepping loop:

* mode 0: two solutions of ``y'' = (q + c sin(2 w x + d) x^-g + q1 - lam) y``
  packed as ``(y1, y1', y2, y2')``;
* mode 1: the Hill equation (no perturbation) with the lambda-derivatives of
  both solutions appended, ``(y1, y1', y2, y2', dy1, dy1', dy2, dy2')``.

``par`` holds ``(lam, a, h, c, omega, delta, gamma, c1, alpha1)`` and ``coef``
the periodic cubic table of ``q`` on a uniform grid of step ``h``.
"""

import math

import numpy as np
from numba import njit

_LOG_RESCALE = 100.0 * math.log(10.0)


@njit(cache=True)
def qval(x, a, h, coef):
    xm = x - a * math.floor(x / a)
    i = int(xm / h)
    n = coef.shape[0]
    if i >= n:
        i = n - 1
    d = xm - i * h
    return coef[i, 0] + d * (coef[i, 1] + d * (coef[i, 2] + d * coef[i, 3]))


@njit(cache=True)
def _rhs(mode, x, y, k, par, coef):
    lam = par[0]
    v = qval(x, par[1], par[2], coef) - lam
    if mode == 0:
        if par[3] != 0.0:
            v += par[3] * math.sin(2.0 * par[4] * x + par[5]) * x ** (-par[6])
        if par[7] != 0.0:
            v += par[7] * (1.0 + x) ** (-(1.0 + par[8]))
        k[0] = y[1]
        k[1] = v * y[0]
        k[2] = y[3]
        k[3] = v * y[2]
    else:
        k[0] = y[1]
        k[1] = v * y[0]
        k[2] = y[3]
        k[3] = v * y[2]
        k[4] = y[5]
        k[5] = v * y[4] - y[0]
        k[6] = y[7]
        k[7] = v * y[6] - y[2]


@njit(cache=True, nogil=True)
def dp54(mode, x0, x1, y, par, coef, rtol, hmax, xs, out, outlog):
    """Integrate from x0 to x1 > x0 in place; dense output at sorted ``xs``.

    Returns ``(nsteps, log_scale)``; the state is rescaled by 1e-100 whenever
    its max-norm exceeds 1e100 and the discarded log factor is accumulated.
    """
    n = y.size
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    k5 = np.empty(n)
    k6 = np.empty(n)
    k7 = np.empty(n)
    yt = np.empty(n)
    yn = np.empty(n)
    x = x0
    h = min(hmax, 1e-3 * max(x1 - x0, 1e-12))
    if x0 > 0.0:
        h = min(h, 0.5 * x0 + 1e-12)
    err_old = 1e-4
    logacc = 0.0
    nsteps = 0
    j = 0
    while j < xs.size and xs[j] <= x0:
        for i in range(n):
            out[j, i] = y[i]
        outlog[j] = 0.0
        j += 1
    _rhs(mode, x, y, k1, par, coef)
    while x < x1:
        if x + h > x1:
            h = x1 - x
        if h < 1e-15 * max(abs(x), 1.0):
            return -1, logacc
        for i in range(n):
            yt[i] = y[i] + h * (0.2 * k1[i])
        _rhs(mode, x + 0.2 * h, yt, k2, par, coef)
        for i in range(n):
            yt[i] = y[i] + h * (3.0 / 40.0 * k1[i] + 9.0 / 40.0 * k2[i])
        _rhs(mode, x + 0.3 * h, yt, k3, par, coef)
        for i in range(n):
            yt[i] = y[i] + h * (44.0 / 45.0 * k1[i] - 56.0 / 15.0 * k2[i] + 32.0 / 9.0 * k3[i])
        _rhs(mode, x + 0.8 * h, yt, k4, par, coef)
        for i in range(n):
            yt[i] = y[i] + h * (19372.0 / 6561.0 * k1[i] - 25360.0 / 2187.0 * k2[i]
                                + 64448.0 / 6561.0 * k3[i] - 212.0 / 729.0 * k4[i])
        _rhs(mode, x + 8.0 / 9.0 * h, yt, k5, par, coef)
        for i in range(n):
            yt[i] = y[i] + h * (9017.0 / 3168.0 * k1[i] - 355.0 / 33.0 * k2[i]
                                + 46732.0 / 5247.0 * k3[i] + 49.0 / 176.0 * k4[i]
                                - 5103.0 / 18656.0 * k5[i])
        _rhs(mode, x + h, yt, k6, par, coef)
        for i in range(n):
            yn[i] = y[i] + h * (35.0 / 384.0 * k1[i] + 500.0 / 1113.0 * k3[i]
                                + 125.0 / 192.0 * k4[i] - 2187.0 / 6784.0 * k5[i]
                                + 11.0 / 84.0 * k6[i])
        _rhs(mode, x + h, yn, k7, par, coef)
        nrm = 0.0
        for i in range(n):
            nrm += yn[i] * yn[i]
        floor = 1e-8 * math.sqrt(nrm)
        s = 0.0
        for i in range(n):
            ev = h * (71.0 / 57600.0 * k1[i] - 71.0 / 16695.0 * k3[i] + 71.0 / 1920.0 * k4[i]
                      - 17253.0 / 339200.0 * k5[i] + 22.0 / 525.0 * k6[i] - 1.0 / 40.0 * k7[i])
            sc = rtol * max(max(abs(y[i]), abs(yn[i])), floor) + 1e-300
            s += (ev / sc) ** 2
        err = math.sqrt(s / n)
        if not (err == err):
            h *= 0.2
            continue
        if err <= 1.0:
            xn = x + h
            if x1 - xn < 1e-14 * max(abs(x1), 1.0):
                xn = x1
            while j < xs.size and xs[j] <= xn:
                th = (xs[j] - x) / h
                for i in range(n):
                    out[j, i] = ((1.0 - th) * y[i] + th * yn[i]
                                 + th * (th - 1.0) * ((1.0 - 2.0 * th) * (yn[i] - y[i])
                                                      + (th - 1.0) * h * k1[i] + th * h * k7[i]))
                outlog[j] = logacc
                j += 1
            x = xn
            big = 0.0
            for i in range(n):
                y[i] = yn[i]
                k1[i] = k7[i]
                big = max(big, abs(y[i]))
            if big > 1e100:
                for i in range(n):
                    y[i] *= 1e-100
                    k1[i] *= 1e-100
                logacc += _LOG_RESCALE
            nsteps += 1
            if err > 0.0:
                fac = 0.9 * err ** (-0.7 / 5.0) * err_old ** (0.4 / 5.0)
            else:
                fac = 5.0
            fac = min(5.0, max(0.2, fac))
            err_old = max(err, 1e-4)
            h = min(hmax, h * fac)
        else:
            h = h * max(0.2, 0.9 * err ** (-0.2))
    return nsteps, logacc
