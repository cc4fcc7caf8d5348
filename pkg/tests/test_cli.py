import json

import numpy as np
import pytest

from capstrip.cli import EXIT_ABORTED, EXIT_CONFIG, EXIT_OK, main
from capstrip.formats import read_csv, read_field


def _cfg(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_selftest(tmp_path):
    out = tmp_path / "out"
    assert main(["selftest", "--out", str(out)]) == EXIT_OK
    head, rows = read_csv(str(out / "report.csv"))
    assert head == ["name", "measured", "threshold", "pass"]
    assert all(r[3] == "true" for r in rows)
    assert json.loads((out / "manifest.json").read_text())["command"] == "selftest"


def test_simulate_equilibrium(tmp_path):
    cfg = _cfg(tmp_path, "domain.n = 16\ndomain.M = 16\ninitial.preset = equilibrium\n"
                         "integrator.T = 0.5\nintegrator.stride = 2\n")
    out = tmp_path / "eq"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == EXIT_OK
    head, rows = read_csv(str(out / "diagnostics.csv"))
    H = [float(r[head.index("H")]) for r in rows]
    assert max(map(abs, H)) == 0.0
    _, z = read_field(str(out / "zeta_00000.cfield"))
    assert np.all(z == 0)


def test_simulate_deterministic(tmp_path):
    cfg = _cfg(tmp_path, "domain.n = 16\ndomain.M = 16\ninitial.amplitude = 0.01\n"
                         "integrator.T = 0.3\n")
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--config", cfg, "--out", str(a)]) == EXIT_OK
    assert main(["simulate", "--config", cfg, "--out", str(b)]) == EXIT_OK
    assert (a / "diagnostics.csv").read_bytes() == (b / "diagnostics.csv").read_bytes()
    files = sorted(p.name for p in a.glob("*.cfield"))
    assert files and all((a / f).read_bytes() == (b / f).read_bytes() for f in files)


def test_inadmissible_initial_data(tmp_path, capsys):
    cfg = _cfg(tmp_path, "domain.n = 16\ndomain.M = 16\ninitial.amplitude = 0.95\n")
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    assert "inadmissible" in capsys.readouterr().err


def test_bad_config(tmp_path):
    cfg = _cfg(tmp_path, "domain.n = 15\n")
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    assert main(["simulate", "--config", str(tmp_path / "nope.cfg")]) == EXIT_CONFIG
    assert main(["selftest", "--threads", "0"]) == EXIT_CONFIG


def test_out_env_override(tmp_path, monkeypatch):
    target = tmp_path / "env_out"
    monkeypatch.setenv("CAPSTRIP_OUT", str(target))
    assert main(["selftest", "--out", str(tmp_path / "ignored")]) == EXIT_OK
    assert (target / "report.csv").exists()
    assert not (tmp_path / "ignored").exists()


def test_unknown_command():
    with pytest.raises(SystemExit):
        main(["fly"])


def test_aborted_run(tmp_path):
    from capstrip.formats import write_field
    x = np.arange(16) * 2 * np.pi / 16
    write_field(str(tmp_path / "z.cfield"), 0.4 * np.cos(x), 2 * np.pi, "zeta")
    write_field(str(tmp_path / "p.cfield"), 1.0 * np.sin(x), 2 * np.pi, "psi")
    cfg = _cfg(tmp_path, "domain.n = 16\ndomain.M = 16\nphysics.h0 = 0.5\n"
                         "initial.preset = from_file\ninitial.zeta_file = z.cfield\n"
                         "initial.psi_file = p.cfield\nintegrator.T = 3\n")
    out = tmp_path / "ab"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == EXIT_ABORTED
    assert json.loads((out / "manifest.json").read_text())["aborted"] is True


@pytest.mark.parametrize("command", ["dno", "orders", "linear", "taylor", "dispersion", "limit"])
def test_experiment_commands(tmp_path, command):
    cfg = _cfg(tmp_path, "domain.n = 32\ndomain.M = 32\ndispersion.k = 1\ndispersion.kappa = 0\n"
                         "limit.T = 0.5\nlinear.T = 0.5\norders.frequencies = 2,4,8\n")
    out = tmp_path / command
    assert main([command, "--config", cfg, "--out", str(out)]) == EXIT_OK
    name = "orders.csv" if command == "orders" else "report.csv"
    _, rows = read_csv(str(out / name))
    assert rows and all(r[3] == "true" for r in rows)
    assert (out / "manifest.json").exists()
