"""Command-line interface.

Configuration is a flat ``key = value`` file with section prefixes, e.g.::

    background.type = free
    background.a = 0.75
    wvn.c = 2
    wvn.omega = 3.141592653589793
    wvn.gamma = 0.6
    wvn.alpha = auto
    run.ode_tol = 1e-9
"""

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass

import numpy as np

from .asymptotic import predict as predict_constants
from .critical import PowerLawQ1, WvNProblem, critical_point
from .floquet import PeriodicBackground, band_edges
from .model import (REMAINDER_FIXTURES, ScheduleError, connection_matrix, model_fixture,
                    phi_functional, verify_theorem42)
from .spectral import (EIG_TOL, InsufficientData, X_MAX_CAP, estimate_alpha_cr,
                       geometric_offsets, pseudogap_scan)

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3

KNOWN_KEYS = {
    "background.type", "background.a", "background.v0", "background.file",
    "wvn.c", "wvn.omega", "wvn.delta", "wvn.gamma", "wvn.alpha",
    "q1.type", "q1.c1", "q1.alpha1",
    "run.ode_tol", "run.quad_tol", "run.x_max_cap", "run.time_per_sample",
    "model.Z0", "model.beta", "model.gamma", "output.format",
}


class ConfigError(ValueError):
    pass


def fmt(v):
    """Round-trip decimal text for floats."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def parse_config(text):
    cfg = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {n}: unknown key {key!r}")
        cfg[key] = val
    return cfg


@dataclass
class RunConfig:
    bg: PeriodicBackground
    c: float
    omega: float
    delta: float
    gamma: float
    q1: object
    alpha: object
    ode_tol: float
    quad_tol: float
    x_max_cap: float
    time_per_sample: float
    Z0: float
    output_format: str

    def problem(self, alpha=None):
        a = self.alpha if alpha is None else alpha
        return WvNProblem(self.bg, self.c, self.omega, self.delta, self.gamma, self.q1,
                          0.0 if a == "auto" else float(a))


def _num(cfg, key, default):
    try:
        return float(cfg.get(key, default))
    except ValueError:
        raise ConfigError(f"{key} must be a number")


def _load_background(cfg):
    kind = cfg.get("background.type", "free")
    a = _num(cfg, "background.a", 1.0)
    if kind == "free":
        return PeriodicBackground.free(a)
    if kind == "constant":
        return PeriodicBackground.constant(_num(cfg, "background.v0", 0.0), a)
    if kind == "sampled":
        path = cfg.get("background.file")
        if not path:
            raise ConfigError("background.file is required for a sampled background")
        data = np.loadtxt(path, ndmin=2)
        if data.shape[1] != 2:
            raise ConfigError("sampled potential file must have two columns (x, q)")
        x, q = data[:, 0], data[:, 1]
        dx = np.diff(x)
        if np.any(np.abs(dx - dx[0]) > 1e-9 * max(abs(dx[0]), 1.0)):
            raise ConfigError("sampled potential requires a uniform grid")
        period = x[-1] - x[0] + dx[0] if "background.a" not in cfg else a
        if abs(x[-1] - x[0] - period) < 1e-9 * period:
            q = q[:-1]  # endpoint repeats the first sample
        return PeriodicBackground.from_samples(q, period)
    raise ConfigError(f"background.type must be free, constant or sampled, not {kind!r}")


def load_config(path):
    cfg = {}
    if path is not None:
        with open(path) as fh:
            cfg = parse_config(fh.read())
    bg = _load_background(cfg)
    gamma = _num(cfg, "wvn.gamma", 0.75)
    if not 0.5 < gamma < 1:
        raise ConfigError(f"wvn.gamma = {gamma!r} violates the condition gamma in (1/2, 1)")
    omega = _num(cfg, "wvn.omega", 0.3 * math.pi)
    r = 2 * bg.a * omega / math.pi
    if abs(r - round(r)) < 1e-9:
        raise ConfigError("2*a*omega/pi is an integer: critical points must not coincide with band endpoints")
    alpha = cfg.get("wvn.alpha", "0")
    if alpha != "auto":
        try:
            alpha = float(alpha)
        except ValueError:
            raise ConfigError("wvn.alpha must be a number in [0, pi) or 'auto'")
        if not 0 <= alpha < math.pi:
            raise ConfigError(f"wvn.alpha = {alpha!r} violates alpha in [0, pi)")
    q1type = cfg.get("q1.type", "none")
    if q1type == "none":
        q1 = None
    elif q1type == "powerlaw":
        q1 = PowerLawQ1(_num(cfg, "q1.c1", 0.0), _num(cfg, "q1.alpha1", 1.0))
        if q1.alpha1 <= 0:
            raise ConfigError("q1.alpha1 must be positive")
    else:
        raise ConfigError(f"q1.type must be none or powerlaw, not {q1type!r}")
    out = RunConfig(bg, _num(cfg, "wvn.c", 1.0), omega, _num(cfg, "wvn.delta", 0.0), gamma, q1, alpha,
                    _num(cfg, "run.ode_tol", EIG_TOL), _num(cfg, "run.quad_tol", 1e-12),
                    _num(cfg, "run.x_max_cap", X_MAX_CAP), _num(cfg, "run.time_per_sample", 0.0),
                    _num(cfg, "model.Z0", 6.0), cfg.get("output.format", "csv"))
    out.problem()  # remaining invariants
    return out


def _write_csv(rows, header, out):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    text = buf.getvalue()
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _emit_json(obj, out=None):
    text = json.dumps(obj, indent=2, sort_keys=False) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _parse_list(text):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse list {text!r}")
    if not vals:
        raise ConfigError("empty list")
    return vals


def _parse_offsets(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError("--offsets expects lo:hi:n")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f"cannot parse offsets {text!r}")
    if not (0 < lo < hi and n >= 2):
        raise ConfigError("offsets need 0 < lo < hi and n >= 2")
    return np.geomspace(lo, hi, n)


def cmd_bands(cfg, j_max, out=None):
    bs = band_edges(cfg.bg, j_max)
    _write_csv([(j, bs.lower[j], bs.upper[j]) for j in range(j_max + 1)], ["j", "lambda_j", "mu_j"], out)


def _crit(cfg, band, sign):
    bs = band_edges(cfg.bg, max(band, 0) + 1)
    prob = cfg.problem()
    return prob, bs, critical_point(prob, bs, band, sign)


def cmd_predict(cfg, band, sign, out=None):
    prob, bs, cr = _crit(cfg, band, sign)
    p = predict_constants(cr, cfg.bg.a)
    _emit_json({"nu": cr.nu, "beta_cr": cr.beta_cr, "phi_cr": cr.phi_cr, "c_cr": p.c_cr,
                "a_cr": p.a_cr, "C_mp": p.C_mp, "exponent_coeff": p.exponent_coeff}, out)


def cmd_pseudogap(cfg, band, sign, offsets, out=None):
    prob, bs, cr = _crit(cfg, band, sign)
    acr = estimate_alpha_cr(prob, bs, cr)
    alpha = (acr.alpha_cr + math.pi / 2) % math.pi if cfg.alpha == "auto" else float(cfg.alpha)
    prob = cfg.problem(alpha)
    scan = pseudogap_scan(prob, bs, cr, offsets, tol=cfg.ode_tol, cap=cfg.x_max_cap,
                          alpha_cr=acr.alpha_cr)
    rows = []
    entries = [(s, off, smp) for s, off, smp in scan.samples] + list(scan.excluded)
    entries.sort(key=lambda e: (e[0] != "above", e[1]))
    for side, off, smp in entries:
        sgn = 1.0 if side == "above" else -1.0
        if isinstance(smp, Exception):
            rows.append((cr.nu + sgn * off, sgn * off, "nan", "nan", "nan", "nan", False))
        else:
            rows.append((smp.lam, sgn * off, smp.A_alpha.real, smp.A_alpha.imag, smp.rho_prime,
                         smp.tail_error, smp.converged))
    _write_csv(rows, ["lambda", "offset", "A_re", "A_im", "rho_prime", "tail_error", "converged"], out)
    summary = {"nu": cr.nu, "alpha": alpha, "alpha_cr": acr.alpha_cr, "beta_cr": cr.beta_cr,
               "excluded": len(scan.excluded), "fits": {}}
    for side, fit in scan.fits.items():
        summary["fits"][side] = {"slope": fit.slope, "slope_err": fit.slope_err,
                                 "slope_target": fit.slope_target, "rel_dev": fit.rel_dev,
                                 "slope_target_physical": fit.slope_target_physical,
                                 "rel_dev_physical": fit.rel_dev_physical, "n_points": len(fit.points)}
    _emit_json(summary)


FIXTURES = {
    "zero-plus": ("zero", "plus"),
    "zero-minus": ("zero", "minus"),
    "offdiag-plus": ("offdiag", "plus"),
    "offdiag-minus": ("offdiag", "minus"),
}


def cmd_model_verify(beta, gamma, eps0_list, fixture, out=None):
    if fixture not in FIXTURES:
        raise ConfigError(f"unknown fixture {fixture!r}; known: {', '.join(sorted(FIXTURES))}")
    rem, direction = FIXTURES[fixture]
    spec = model_fixture(rem, beta, gamma)
    if direction == "minus":
        fm = np.array([0.0, 1.0]) if REMAINDER_FIXTURES[rem][0] is None else phi_functional(spec).f_minus
        spec = spec.with_f(fm)
    rows = verify_theorem42(spec, eps0_list, both_signs=True)
    _write_csv([(r.eps0, r.eps, r.limit_norm, r.ratio, r.target) for r in rows],
               ["eps0", "eps", "limit_norm", "ratio", "target"], out)


def cmd_connection(beta, gamma, eps_list, Z0=6.0, out=None):
    reps = [connection_matrix(beta, gamma, e, Z0) for e in eps_list]
    rows = []
    for r in reps:
        d = r.D_matrix
        rows.append((r.eps, d[0, 0].real, d[0, 0].imag, d[1, 0].real, d[1, 0].imag,
                     abs(np.linalg.det(d)), r.col1_target_dev, r.det_dev, r.col1_limit_dev, r.det_limit_dev))
    _write_csv(rows, ["eps", "D11_re", "D11_im", "D21_re", "D21_im", "abs_det", "col1_target_dev",
                      "det_dev", "col1_limit_dev", "det_limit_dev"], out)


def build_parser():
    p = argparse.ArgumentParser(prog="pseudogap", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", default=None, help="key = value configuration file")
        sp.add_argument("--out", default=None, help="output path (default stdout)")

    sp = sub.add_parser("bands", help="band edges as CSV")
    common(sp)
    sp.add_argument("--jmax", type=int, default=3)
    sp = sub.add_parser("predict", help="asymptotic constants at a critical point as JSON")
    common(sp)
    sp.add_argument("--band", type=int, default=0)
    sp.add_argument("--sign", choices=["+", "-"], default="-")
    sp = sub.add_parser("pseudogap", help="spectral density scan around a critical point")
    common(sp)
    sp.add_argument("--band", type=int, default=0)
    sp.add_argument("--sign", choices=["+", "-"], default="-")
    sp.add_argument("--offsets", default=None, help="lo:hi:n geometric offsets |lambda - nu|")
    sp = sub.add_parser("model-verify", help="model-problem ratio table")
    common(sp)
    sp.add_argument("--beta", type=float, default=None)
    sp.add_argument("--gamma", type=float, default=None)
    sp.add_argument("--eps0-list", default="0.2,0.1,0.05,0.025")
    sp.add_argument("--fixture", default="zero-plus")
    sp = sub.add_parser("connection", help="turning-point connection diagnostics")
    common(sp)
    sp.add_argument("--beta", type=float, default=None)
    sp.add_argument("--gamma", type=float, default=None)
    sp.add_argument("--eps-list", default="0.02,0.01,0.005")
    return p


def _model_params(args):
    cfg = {}
    if args.config:
        with open(args.config) as fh:
            cfg = parse_config(fh.read())
    beta = args.beta if args.beta is not None else _num(cfg, "model.beta", 0.25)
    gamma = args.gamma if args.gamma is not None else _num(cfg, "model.gamma", 0.6)
    if not beta > 0:
        raise ConfigError("beta must be positive")
    if not 0.5 < gamma < 1:
        raise ConfigError(f"gamma = {gamma!r} violates the condition gamma in (1/2, 1)")
    return beta, gamma, _num(cfg, "model.Z0", 6.0)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "bands":
            if args.jmax < 0:
                raise ConfigError("--jmax must be nonnegative")
            cmd_bands(load_config(args.config), args.jmax, args.out)
        elif args.command == "predict":
            cmd_predict(load_config(args.config), args.band, args.sign, args.out)
        elif args.command == "pseudogap":
            cfg = load_config(args.config)
            offsets = _parse_offsets(args.offsets) if args.offsets else geometric_offsets(3e-3, 1e-1)
            cmd_pseudogap(cfg, args.band, args.sign, offsets, args.out)
        elif args.command == "model-verify":
            beta, gamma, _ = _model_params(args)
            cmd_model_verify(beta, gamma, _parse_list(args.eps0_list), args.fixture, args.out)
        elif args.command == "connection":
            beta, gamma, z0 = _model_params(args)
            cmd_connection(beta, gamma, _parse_list(args.eps_list), z0, args.out)
    except InsufficientData as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, ScheduleError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
