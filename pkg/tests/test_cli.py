import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from pseudogap import cli, spectral
from pseudogap.critical import WvNProblem, critical_point
from pseudogap.floquet import PeriodicBackground, band_edges
from pseudogap.spectral import DensitySample

FREE_03 = """background.type = free
background.a = 1
wvn.c = 1
wvn.omega = {omega!r}
wvn.gamma = 0.75
""".format(omega=0.3 * math.pi)

SCAN = """background.type = free
background.a = 0.75
wvn.c = 2
wvn.omega = {omega!r}
wvn.gamma = 0.6
wvn.alpha = auto
run.x_max_cap = 20000
""".format(omega=math.pi)


def _cfg(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_bands_free(tmp_path, capsys):
    assert cli.main(["bands", "--config", _cfg(tmp_path, FREE_03), "--jmax", "2"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert rows[0] == ["j", "lambda_j", "mu_j"]
    assert len(rows) == 4 and all(len(r) == 3 for r in rows)
    for j, r in enumerate(rows[1:]):
        assert float(r[1]) == pytest.approx((j * math.pi) ** 2, abs=1e-8)
        assert float(r[2]) == pytest.approx(((j + 1) * math.pi) ** 2, abs=1e-8)


def test_bad_gamma_exit_2(tmp_path, capsys):
    path = _cfg(tmp_path, FREE_03.replace("wvn.gamma = 0.75", "wvn.gamma = 1.2"))
    assert cli.main(["bands", "--config", path]) == 2
    assert "gamma" in capsys.readouterr().err


def test_collision_and_unknown_key_exit_2(tmp_path, capsys):
    path = _cfg(tmp_path, FREE_03.replace(repr(0.3 * math.pi), repr(math.pi / 2)))
    assert cli.main(["predict", "--config", path]) == 2
    assert "endpoints" in capsys.readouterr().err
    assert cli.main(["bands", "--config", _cfg(tmp_path, "wvn.bogus = 1\n", "b.cfg")]) == 2


def test_predict_json(tmp_path):
    out = tmp_path / "p.json"
    assert cli.main(["predict", "--config", _cfg(tmp_path, FREE_03), "--sign", "-", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert list(doc) == ["nu", "beta_cr", "phi_cr", "c_cr", "a_cr", "C_mp", "exponent_coeff"]
    assert doc["beta_cr"] == pytest.approx(0.26526, abs=1e-5)
    assert doc["C_mp"] == pytest.approx(0.5, abs=1e-6)
    assert doc["nu"] == pytest.approx((0.3 * math.pi) ** 2, abs=1e-9)


def test_model_verify_rows_and_unknown_fixture(tmp_path, capsys):
    out = tmp_path / "m.csv"
    assert cli.main(["model-verify", "--beta", "0.25", "--gamma", "0.6", "--eps0-list", "0.1",
                     "--fixture", "zero-plus", "--out", str(out)]) == 0
    rows = _rows(out.read_text())
    assert rows[0] == ["eps0", "eps", "limit_norm", "ratio", "target"]
    assert len(rows) == 3
    assert float(rows[1][0]) == 0.1 and float(rows[2][0]) == -0.1
    assert cli.main(["model-verify", "--fixture", "nope", "--eps0-list", "0.1"]) == 2


def test_connection_csv_and_refusal(tmp_path, capsys):
    out = tmp_path / "c.csv"
    assert cli.main(["connection", "--beta", "0.5", "--gamma", "0.75", "--eps-list", "0.02,0.01,0.005",
                     "--out", str(out)]) == 0
    rows = _rows(out.read_text())
    assert len(rows) == 4
    lim = [float(r[8]) for r in rows[1:]]
    assert lim[0] > lim[1] > lim[2]
    assert cli.main(["connection", "--beta", "0.5", "--gamma", "0.75", "--eps-list", "0.5"]) == 2


def test_float_round_trip():
    for v in (0.1, 1 / 3, 2.0 ** -40, 6.02214076e23):
        assert float(cli.fmt(v)) == v
    assert cli.fmt(True) == "true"


def test_pseudogap_deterministic(tmp_path, capsys):
    path = _cfg(tmp_path, SCAN)
    outs = []
    for k in range(2):
        out = tmp_path / f"s{k}.csv"
        assert cli.main(["pseudogap", "--config", path, "--offsets", "0.05:0.1:5", "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    rows = _rows(outs[0].decode())
    assert rows[0] == ["lambda", "offset", "A_re", "A_im", "rho_prime", "tail_error", "converged"]
    assert len(rows) == 11


def test_pseudogap_summary_and_exit_3(tmp_path, capsys):
    path = _cfg(tmp_path, SCAN)
    assert cli.main(["pseudogap", "--config", path, "--offsets", "0.05:0.1:5",
                     "--out", str(tmp_path / "s.csv")]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert set(doc["fits"]) == {"above", "below"}
    for fit in doc["fits"].values():
        assert fit["slope"] < 0 and fit["n_points"] == 5
    assert cli.main(["pseudogap", "--config", path, "--offsets", "0.05:0.1:3"]) == 3


def test_scan_excludes_unconverged(monkeypatch):
    bg = PeriodicBackground.free(0.75)
    bs = band_edges(bg, 1)
    p = WvNProblem(bg, 2.0, math.pi, 0.0, 0.6, alpha=1.0)
    cr = critical_point(p, bs, 0, "-")

    def fake(problem, lam, bands, crit, tol, cap):
        off = abs(lam - crit.nu)
        rho = math.exp(-0.67 * off ** (-2 / 3))
        return DensitySample(lam, 1.0, rho, 0.0, 1.0, converged=off < 0.09)

    monkeypatch.setattr(spectral, "spectral_density", fake)
    scan = spectral.pseudogap_scan(p, bs, cr, np.geomspace(0.01, 0.1, 6))
    assert len(scan.excluded) == 2
    assert all(not e[2].converged for e in scan.excluded)
    for fit in scan.fits.values():
        assert len(fit.points) == 5
        assert all(o < 0.09 for o, _ in fit.points)
        assert fit.slope == pytest.approx(-0.67, rel=1e-9)


def test_console_script_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "pseudogap.cli", "bands", "--jmax", "1"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert len(_rows(res.stdout)) == 3
