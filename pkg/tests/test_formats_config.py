import math

import numpy as np
import pytest

from capstrip.config import ConfigError, RunConfig, parse_text
from capstrip.formats import (HEADER_SIZE, FormatError, read_csv, read_field, write_csv,
                              write_field, write_manifest)


@pytest.mark.parametrize("order", ["<", ">"])
@pytest.mark.parametrize("shape", [(16,), (8, 8)])
def test_field_roundtrip(tmp_path, rng, order, shape):
    vals = rng.standard_normal(shape)
    p = tmp_path / "f.cfield"
    write_field(str(p), vals, 2 * math.pi, "zeta", 1.25, order)
    assert p.stat().st_size == HEADER_SIZE + 8 * vals.size
    head, back = read_field(str(p))
    assert np.array_equal(back, vals)
    assert (head.d, head.n, head.name, head.time, head.byteorder) == (len(shape), shape[0], "zeta",
                                                                      1.25, order)
    assert head.L == 2 * math.pi


def test_field_errors(tmp_path):
    p = tmp_path / "bad.cfield"
    p.write_bytes(b"NOTAFIELD" + bytes(200))
    with pytest.raises(FormatError):
        read_field(str(p))
    write_field(str(p), np.zeros(8), 1.0, "x")
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(FormatError, match="payload"):
        read_field(str(p))
    with pytest.raises(FormatError):
        write_field(str(p), np.zeros((4, 8)), 1.0, "x")
    with pytest.raises(FormatError):
        write_field(str(p), np.zeros(8), 1.0, "n" * 65)


def test_csv_bit_exact(tmp_path, rng):
    vals = rng.standard_normal(5) * 10.0 ** rng.integers(-300, 300, 5)
    p = tmp_path / "t.csv"
    write_csv(str(p), ("name", "value", "ok"), [("r", v, bool(v > 0)) for v in vals])
    head, rows = read_csv(str(p))
    assert head == ["name", "value", "ok"]
    assert [float(r[1]) for r in rows] == list(vals)
    assert {r[2] for r in rows} <= {"true", "false"}


def test_manifest(tmp_path):
    import json
    p = tmp_path / "manifest.json"
    write_manifest(str(p), "simulate", {"a": 1}, {"n": 8}, {"total": 0.1}, {"seed": 3})
    m = json.loads(p.read_text())
    assert m["command"] == "simulate" and m["seed"] == 3 and "numpy" in m


def test_parse_and_defaults():
    cfg = RunConfig.from_text("domain.n = 48  # comment\n\ndispersion.k = 1, 2\n")
    assert cfg.int("domain.n") == 48
    assert cfg.ints("dispersion.k") == [1, 2]
    assert cfg.float("physics.g") == 1.0
    assert cfg.dt() is None
    assert cfg.is_set("domain.n") and not cfg.is_set("domain.M")
    assert cfg.as_dict()["domain"]["n"] == "48"


@pytest.mark.parametrize("text", [
    "domain.n 48",
    "n = 48",
    "domain.size = 3",
    "domain.n = 48\ndomain.n = 64",
])
def test_parse_errors(text):
    with pytest.raises(ConfigError):
        parse_text(text)


@pytest.mark.parametrize("text", [
    "domain.d = 3",
    "domain.n = 14",
    "domain.n = 7",
    "domain.M = 4",
    "physics.g = 0",
    "physics.kappa = -1",
    "physics.backend = fem",
    "initial.preset = soliton",
    "initial.preset = from_file",
    "initial.zeta_file = /nonexistent/file",
    "integrator.dt = -0.1",
    "integrator.c_cfl = 2",
    "dispersion.k = 0, 1",
    "dispersion.k = 60",
    "dispersion.periods = 1",
    "orders.frequencies = 4",
    "domain.n = abc",
    "physics.kappa = 0, x",
])
def test_validation_errors(text):
    with pytest.raises(ConfigError):
        RunConfig.from_text(text)


def test_from_file_relative_paths(tmp_path):
    write_field(str(tmp_path / "z.cfield"), np.zeros(16), 2 * math.pi, "zeta")
    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text("domain.n = 16\ninitial.preset = from_file\ninitial.zeta_file = z.cfield\n")
    cfg = RunConfig.from_file(str(cfg_path))
    assert cfg.path("initial.zeta_file") == str(tmp_path / "z.cfield")
    with pytest.raises(ConfigError):
        RunConfig.from_file(str(tmp_path / "missing.cfg"))
