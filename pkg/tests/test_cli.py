import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from pairex import cli
from pairex.dynamics import integrate
from pairex.errors import IntegrationError
from pairex.kernelalg import read_snapshot

# small oracle runs use the default truncation rule, which leaves a visible tail
pytestmark = pytest.mark.filterwarnings("ignore::pairex.errors.TruncationWarning")


def write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_identities_seed_42(tmp_path):
    cfg = write(tmp_path, "grid_points = 16\nN = 10\n")
    code = cli.main(["identities", "--config", cfg, "--out", str(tmp_path / "out"), "--seed", "42"])
    assert code == cli.EXIT_OK
    report = json.loads((tmp_path / "out" / "identities.json").read_text())
    assert report["seed"] == 42 and report["all_pass"]
    assert all(c["value"] < c["tolerance"] for c in report["checks"])


def test_identities_failure_exit_code(tmp_path, monkeypatch):
    import pairex.identities

    fake = {"all_pass": False, "checks": [{"name": "x", "value": 1.0, "tolerance": 0.1, "pass": False}]}
    monkeypatch.setattr(pairex.identities, "identity_suite", lambda cfg: fake)
    cfg = write(tmp_path, "")
    assert cli.main(["identities", "--config", cfg, "--out", str(tmp_path / "o")]) == cli.EXIT_IDENTITIES


def test_free_evolution_outputs(tmp_path):
    cfg = write(
        tmp_path,
        "grid_points = 16\npotential_amplitude = 0\ninitial_momentum = 2\ndt = 0.01\nt_final = 0.5\noutput_interval = 0.1\n",
    )
    out = tmp_path / "free"
    assert cli.main(["evolve", "--config", cfg, "--out", str(out)]) == 0
    rows = read_csv(out / "diagnostics.csv")
    assert rows[0] == ["t", "mass_total", "mass_c", "mass_p", "px", "energy", "zeta_norm", "x0"]
    assert len(rows) == 7
    mass = [float(r[1]) for r in rows[1:]]
    assert max(abs(m - mass[0]) for m in mass) < 1e-12
    assert all(float(r[6]) == 0 for r in rows[1:])
    phi, grid, kind = read_snapshot(out / "snapshots" / "phi_000005.bin")
    assert kind == "field" and grid.points_per_axis == 16 and phi.shape == (16,)
    zeta, _, kind = read_snapshot(out / "snapshots" / "zeta_000000.bin")
    assert kind == "symmetric" and not np.any(zeta)
    assert "grid_points = 16" in (out / "config.txt").read_text()


def test_numerical_failure_flushes_partial_output(tmp_path, monkeypatch):
    def failing(cfg):
        from pairex.config import build_setup

        s = build_setup(cfg)
        traj = integrate(s.phi0, s.zeta0, s.potential, cfg.N, cfg.mode, cfg.dt, cfg.dt, diagnostics=True)
        raise IntegrationError("chart boundary reached", 2 * cfg.dt, traj)

    monkeypatch.setattr(cli, "evolve", failing)
    cfg = write(tmp_path, "grid_points = 8\ndt = 0.01\nt_final = 0.1\n")
    out = tmp_path / "bad"
    assert cli.main(["evolve", "--config", cfg, "--out", str(out)]) == cli.EXIT_NUMERICAL
    assert len(read_csv(out / "diagnostics.csv")) == 3


def test_config_errors_exit_2(tmp_path, monkeypatch, capsys):
    cfg = write(tmp_path, "beta = 1.5\n")
    assert cli.main(["evolve", "--config", cfg]) == cli.EXIT_CONFIG
    assert "beta" in capsys.readouterr().err
    assert cli.main(["evolve", "--config", str(tmp_path / "missing.cfg")]) == cli.EXIT_CONFIG
    monkeypatch.setenv("PAIREX_THREADS", "zero")
    good = write(tmp_path, "sweep_N = 2\noracle_sites = 2\nt_final = 0.01\ndt = 0.01\n", "good.cfg")
    assert cli.main(["sweep", "--config", good, "--out", str(tmp_path / "s")]) == cli.EXIT_CONFIG


def test_bad_seed_rejected(tmp_path):
    cfg = write(tmp_path, "")
    with pytest.raises(SystemExit):
        cli.main(["identities", "--config", cfg, "--seed", str(2**64)])


def test_thread_count(monkeypatch):
    monkeypatch.setenv("PAIREX_THREADS", "3")
    assert cli.thread_count() == 3
    monkeypatch.delenv("PAIREX_THREADS")
    assert cli.thread_count() >= 1


def test_sweep_columns_and_thread_independence(tmp_path, monkeypatch):
    text = "oracle_sites = 4\nsweep_N = 2, 3\nsweep_beta = 0\ndt = 0.01\nt_final = 0.1\n"
    cfg = write(tmp_path, text)
    outs = []
    for threads in ("1", "2"):
        monkeypatch.setenv("PAIREX_THREADS", threads)
        out = tmp_path / f"sweep{threads}"
        assert cli.main(["sweep", "--config", cfg, "--out", str(out)]) == 0
        outs.append((out / "sweep.csv").read_bytes())
    assert outs[0] == outs[1]
    rows = read_csv(tmp_path / "sweep1" / "sweep.csv")
    assert rows[0] == cli.SWEEP_COLUMNS
    assert [float(r[0]) for r in rows[1:]] == [2.0, 3.0]
    for r in rows[1:]:
        f, err = float(r[3]), float(r[5])
        assert err == pytest.approx(math.sqrt(2 - 2 * f))


def test_oracle_report(tmp_path):
    cfg = write(tmp_path, "oracle_sites = 4\nN = 2\ndt = 0.01\nt_final = 0.1\n")
    out = tmp_path / "oracle"
    assert cli.main(["oracle", "--config", cfg, "--out", str(out)]) == 0
    doc = json.loads((out / "oracle.json").read_text())
    for key in ("M", "n_max", "N", "beta", "t", "fidelity", "error", "tail_mass", "X"):
        assert key in doc
    assert doc["error"] == pytest.approx(math.sqrt(2 - 2 * doc["fidelity"]))
    assert doc["X"]["X1"] < 1e-6 and doc["X"]["X2"] < 1e-6
    assert doc["X"]["X0"] == pytest.approx(doc["X"]["X0_analytic"], rel=1e-6)


def test_console_entry_point(tmp_path):
    cfg = write(tmp_path, "grid_points = 8\n")
    proc = subprocess.run(
        [sys.executable, "-m", "pairex.cli", "identities", "--config", cfg, "--out", str(tmp_path / "o")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
