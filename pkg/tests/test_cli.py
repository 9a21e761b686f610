import csv
import subprocess
import sys

import numpy as np
import pytest

from oftsolve import cli
from oftsolve.io import read_oftf
from oftsolve.paraxial import SingularLineError

CONFIG = """
[grid]
dim = 2
lower = -1, -1
upper = 1, 1
n = 30, 30

[solver]
kappa = 8
dt0 = 0.05

[refraction]
kind = gaussian
amplitude = 0.1
width = 0.4

[incident]
kind = plane
direction = 1, 0

[output]
path = out.oftf
format = oftf
"""


def _write(tmp_path, text=CONFIG, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_solve_writes_field_and_report(tmp_path, capsys):
    cfg = _write(tmp_path)
    assert cli.main(["solve", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "rel_residual" in out and "ub_estimate" in out
    f = read_oftf(tmp_path / "out.oftf")
    assert f.grid.n == (30, 30) and np.isfinite(f.values).all()
    assert f.max_abs() > 0


def test_apply_sqrt_and_csv(tmp_path, capsys):
    cfg = _write(tmp_path, CONFIG.replace("path = out.oftf\nformat = oftf", "path = half.csv\nformat = csv"))
    assert cli.main(["apply-sqrt", str(cfg)]) == 0
    assert "steps" in capsys.readouterr().out
    rows = (tmp_path / "half.csv").read_text().splitlines()
    assert rows[0] == "x,y,re,im" and len(rows) == 901


def test_uniform_medium_scatters_nothing(tmp_path):
    cfg = _write(tmp_path, CONFIG.replace("kind = gaussian\namplitude = 0.1\nwidth = 0.4", "kind = uniform\nbeta0 = 1"))
    assert cli.main(["solve", str(cfg)]) == 0
    assert read_oftf(tmp_path / "out.oftf").max_abs() <= 1e-10
    assert cli.main(["apply-sqrt", str(cfg)]) == 0
    assert read_oftf(tmp_path / "out.oftf").max_abs() <= 1e-10


def test_eigen_csv(tmp_path):
    out = tmp_path / "eig.csv"
    assert cli.main(["eigen", "--alpha", "10", "--length", "2", "--count", "5", "--out", str(out)]) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["n", "re_lambda", "im_lambda", "abs_f"]
    assert len(rows) == 6
    assert float(rows[1][1]) == pytest.approx(1.5547, abs=1e-3)
    assert all(float(r[2]) < 0 for r in rows[1:])


def test_demo_ode(capsys):
    assert cli.main(["demo", "ode2", "--dx", "0.1"]) == 0
    assert "max_error" in capsys.readouterr().out
    assert cli.main(["demo", "ode1", "--points", "20"]) == 0


def test_converge_row1(tmp_path, capsys):
    out = tmp_path / "t.csv"
    assert cli.main(["converge", "--dim", "1", "--rows", "1", "--out", str(out)]) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["dt0", "n_tau", "n_x", "rel_err_v1", "ub", "rel_err_v2", "res"]
    assert rows[1][1] == "102" and rows[1][2] == "70"


def test_exit_code_config_error(tmp_path, capsys):
    cfg = _write(tmp_path, CONFIG.replace("kappa = 8", "kappa = -8"))
    assert cli.main(["solve", str(cfg)]) == 2
    assert "solver.kappa" in capsys.readouterr().err
    assert cli.main(["converge", "--rows", "x..y"]) == 2
    assert cli.main(["eigen", "--count", "0"]) == 2


def test_exit_code_io_error(tmp_path):
    assert cli.main(["solve", str(tmp_path / "nope.cfg")]) == 4
    cfg = _write(tmp_path, CONFIG.replace("path = out.oftf", f"path = {tmp_path}/no/such/dir/out.oftf"))
    assert cli.main(["solve", str(cfg)]) == 4
    bad = tmp_path / "bad.pgm"
    bad.write_bytes(b"P5\n2 2\n255\n")
    raster = CONFIG.replace("kind = gaussian\namplitude = 0.1\nwidth = 0.4", "kind = raster\npath = bad.pgm\namplitude = 0.1")
    assert cli.main(["solve", str(_write(tmp_path, raster))]) == 4


def test_exit_code_solver_failure(tmp_path, monkeypatch):
    import oftsolve.helmholtz as hz

    def boom(*a, **k):
        raise SingularLineError(0, 3)

    monkeypatch.setattr(hz, "solve_helmholtz", boom)
    assert cli.main(["solve", str(_write(tmp_path))]) == 3


def test_threads_flag_and_env(tmp_path, monkeypatch):
    monkeypatch.setenv("OFT_THREADS", "1")
    assert cli.main(["--threads", "1", "eigen", "--count", "2"]) == 0


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "oftsolve.cli", "eigen", "--count", "3"], capture_output=True, text=True, check=False
    )
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[0] == "n,re_lambda,im_lambda,abs_f"
