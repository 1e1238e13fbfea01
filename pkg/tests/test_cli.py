import configparser
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from jcm_kinetics.cli import EXIT_CONFIG, EXIT_DYNAMICS, main
from jcm_kinetics.config import DEFAULT_T_MAX, ConfigError, parse_config
from jcm_kinetics.export import COLUMNS, read_csv, write_csv
from jcm_kinetics.model import GaussianState, ModelParams
from jcm_kinetics.runner import RunError, run


def test_empty_config_is_standard_case():
    cfg = parse_config("")
    assert cfg.params == ModelParams(1.0, 1.0, 0.5)
    assert cfg.initial == GaussianState.coherent_excited(5.0)
    assert cfg.mode == "compare" and cfg.n_max is None
    assert cfg.integrator.dt == 1e-3 and cfg.integrator.t_max == DEFAULT_T_MAX


def test_full_config():
    cfg = parse_config("""
        # comment line
        epsilon = 1.2   # trailing comment
        coupling=0
        B0 = 3,-4
        y0 = 0,0.75
        v0 = 0.6
        p1_0 = 0.9
        pm1_0 = 0.1
        dt = 0.002
        t_max = 3
        method = rk45-adaptive
        n_max = auto
        mode = meanfield
        depolarization_guard = 1e-6
        gauge = real
    """)
    assert cfg.params.coupling == 0.0 and cfg.params.epsilon == 1.2
    bo, fe = cfg.initial.boson, cfg.initial.fermion
    assert bo.B == 3 - 4j and bo.x == 1.25 and bo.y == 0.75j
    assert fe.u == pytest.approx(0.8) and fe.v == 0.6
    assert cfg.integrator.method == "rk45-adaptive" and cfg.integrator.dt == 0.002
    assert cfg.rhs.depolarization_guard == 1e-6 and cfg.rhs.gauge == "real"


def test_alpha_shorthand():
    cfg = parse_config("alpha = 2,1")
    assert cfg.initial.boson.B == 2 + 1j and cfg.initial.boson.y == 0
    with pytest.raises(ConfigError) as info:
        parse_config("alpha=2\nB0=1")
    assert info.value.line == 2


@pytest.mark.parametrize("text, line, fragment", [
    ("p1_0=1.5", 1, "occupation p1"),
    ("\n\nfoo=1", 3, "unknown key"),
    ("dt=abc", 1, "malformed"),
    ("B0=1,2,3", 1, "malformed"),
    ("mode=exact\nmode=meanfield", 2, "duplicate"),
    ("x0=2", 1, "canonicity"),
    ("dt=5\nt_max=1", 2, "dt < t_max"),
    ("just words", 1, "key=value"),
    ("n_max=0", 1, "positive"),
    ("epsilon=inf", 1, "finite"),
])
def test_config_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.line == line
    assert fragment in str(info.value)


def test_csv_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    cols = {k: rng.normal(size=7) * 10.0 ** rng.integers(-300, 300, 7) for k in COLUMNS}
    cols["t"] = np.linspace(0, 1, 7)
    path = tmp_path / "x.csv"
    write_csv(path, cols, failure="DepolarizationError at t=1: bad\nthing")
    back, failure = read_csv(path)
    assert failure == "DepolarizationError at t=1: bad thing"
    for k in COLUMNS:
        assert np.array_equal(back[k], cols[k])
    assert path.read_text().splitlines()[0] == ",".join(COLUMNS)


def test_exact_run_initial_row(tmp_path):
    res = run(parse_config("mode=exact\nt_max=20\nrecord_every=100"), out=tmp_path)
    cols, failure = read_csv(res.files["exact"])
    assert failure is None
    assert cols["sigma3"][0] == pytest.approx(1.0, abs=1e-15)
    assert cols["photon"][0] == pytest.approx(25.0, abs=1e-10)
    assert cols["t"][-1] == 20.0 and len(cols["t"]) == 201
    assert np.all(cols["nu"] >= 0) and np.all(cols["p1"] >= cols["pm1"])


def test_exact_run_rejects_squeezed_field(tmp_path):
    with pytest.raises(ValueError):
        run(parse_config("mode=exact\ny0=0.1"), out=tmp_path)


def test_exact_run_atom_superposition(tmp_path):
    # the exact and Gaussian descriptions start from the same atom state
    res = run(parse_config("mode=compare\nv0=0.6\nt_max=0.5\nwindow=0.5\nrecord_every=50"), out=tmp_path)
    ex, _ = read_csv(res.files["exact"])
    mf, _ = read_csv(res.files["meanfield"])
    for k in ("sigma3", "sigma_p", "photon", "energy", "B_re", "B_im", "nu", "p1", "pm1"):
        assert ex[k][0] == pytest.approx(mf[k][0], abs=1e-10), k


def test_meanfield_run_no_depolarization(tmp_path):
    res = run(parse_config("mode=meanfield"), out=tmp_path)
    cols, _ = read_csv(res.files["meanfield"])
    assert np.all(cols["sigma_p"] == 1.0)


def test_compare_run(tmp_path):
    res = run(parse_config(""), out=tmp_path)
    assert set(res.files) == {"exact", "meanfield", "collisional", "report"}
    grids = [read_csv(res.files[m])[0]["t"] for m in ("exact", "meanfield", "collisional")]
    assert all(np.array_equal(grids[0], g) for g in grids)
    cp = configparser.ConfigParser()
    cp.read(res.files["report"])
    h_c = float(cp["collisional"]["sigma3.horizon"])
    h_m = float(cp["meanfield"]["sigma3.horizon"])
    assert h_c > h_m
    assert abs(float(cp["frequency"]["exact"]) - math.sqrt(26)) < 0.1


def test_failed_run_flushes_marked_partial_output(tmp_path):
    with pytest.raises(RunError) as info:
        run(parse_config("mode=compare\nt_max=10.5\nrecord_every=100"), out=tmp_path)
    err = info.value
    assert 9.9 < err.time < 10.0 and set(err.failures) == {"collisional"}
    cols, failure = read_csv(err.files["collisional"])
    assert failure.startswith("DepolarizationError")
    assert cols["t"][-1] < err.time and len(cols["t"]) > 90
    assert read_csv(err.files["meanfield"])[1] is None
    cp = configparser.ConfigParser()
    cp.read(err.files["report"])
    assert "collisional" in cp["failures"]


def test_rephasing_only_rotates_field_amplitude(tmp_path):
    base = run(parse_config("t_max=2\nrecord_every=20"), out=tmp_path / "a")
    chi = 0.9
    b0 = 5 * np.exp(-1j * chi)
    rot = run(parse_config(f"t_max=2\nrecord_every=20\nB0={float(b0.real)!r},{float(b0.imag)!r}"), out=tmp_path / "b")
    for mode in ("exact", "meanfield", "collisional"):
        a, _ = read_csv(base.files[mode])
        b, _ = read_csv(rot.files[mode])
        for k in ("sigma3", "sigma_p", "photon", "energy", "nu", "p1", "pm1"):
            assert np.max(np.abs(a[k] - b[k])) < 1e-10, (mode, k)
        Ba, Bb = a["B_re"] + 1j * a["B_im"], b["B_re"] + 1j * b["B_im"]
        assert np.max(np.abs(Ba * np.exp(-1j * chi) - Bb)) < 1e-10


def test_cli_success(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("t_max=1\nrecord_every=50\n")
    assert main(["--config", str(cfg), "--mode", "collisional", "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "collisional.csv").exists()
    assert "collisional" in capsys.readouterr().out


def test_cli_config_error(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("epsilon=1\np1_0=1.5\n")
    assert main(["--config", str(cfg)]) == EXIT_CONFIG
    line = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert line["status"] == "error" and line["kind"] == "config" and line["line"] == 2


def test_cli_missing_file(tmp_path, capsys):
    assert main(["--config", str(tmp_path / "nope.cfg")]) != 0
    assert json.loads(capsys.readouterr().err)["kind"] == "io"


def test_cli_depolarization_guard_failure(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("mode=collisional\nt_max=1\n")
    code = main(["--config", str(cfg), "--out", str(tmp_path), "--depolarization-guard", "0.99"])
    assert code == EXIT_DYNAMICS
    line = json.loads(capsys.readouterr().err)
    assert line["kind"] == "dynamics" and line["time"] < 0.5
    assert read_csv(tmp_path / "collisional.csv")[1].startswith("DepolarizationError")


def test_console_script(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("mode=exact\nt_max=1\n")
    proc = subprocess.run([sys.executable, "-m", "jcm_kinetics.cli", "--config", str(cfg), "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and (tmp_path / "exact.csv").exists()
