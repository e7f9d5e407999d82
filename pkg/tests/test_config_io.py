import json
import os

import numpy as np
import pytest

from lakesim import cli, io
from lakesim.config import ConfigError, parse_config

GOOD = """
[domain]
shape = "disk"
radius = 1.0
resolution = 24

[data]
b = "1.5 + 0.2*cos(x)*sin(y)"
omega0 = "exp(-3*(x**2 + y**2))"
kappa = 0.5
p = 2.0

[solver]
theta = 0.1
R = 8.0
T = 0.02
dt = 1e-2
output_every = 1

[output]
directory = "out"
monitors = ["gronwall", "max_principle"]
q = 2.0
"""


def test_parse_config_roundtrip():
    sc, cfg, ocfg = parse_config(GOOD)
    assert sc.domain.grid.n == 24
    g = sc.domain.grid
    xc, yc = np.meshgrid(g.xc, g.yc, indexing="ij")
    expect = 1.5 + 0.2 * np.cos(xc) * np.sin(yc)
    assert np.allclose(sc.b_cells[sc.domain.mask], expect[sc.domain.mask])
    assert cfg.theta == 0.1 and cfg.T == 0.02
    assert ocfg.monitors == ("gronwall", "max_principle")


def test_unknown_key_rejected():
    with pytest.raises(ConfigError):
        parse_config(GOOD + "\n[solver2]\nx = 1\n")
    with pytest.raises(ConfigError):
        parse_config(GOOD.replace("kappa = 0.5", "capa = 0.5"))


def test_undefined_name_in_expression():
    with pytest.raises(ConfigError):
        parse_config(GOOD.replace('"1.5 + 0.2*cos(x)*sin(y)"', '"zoo(x)"'))


def test_syntax_error_in_expression():
    with pytest.raises(ConfigError):
        parse_config(GOOD.replace('"1.5 + 0.2*cos(x)*sin(y)"', '"1.5 +"'))


def test_missing_shape():
    with pytest.raises(ConfigError):
        parse_config("[data]\nb = 1.0\n")


def test_bad_G_shape():
    parse_config(GOOD)  # baseline parses
    bad = GOOD.replace("kappa = 0.5", 'G = ["x"]')
    with pytest.raises(ConfigError):
        parse_config(bad)


def test_nonpositive_b_rejected():
    with pytest.raises(ConfigError):
        parse_config(GOOD.replace('"1.5 + 0.2*cos(x)*sin(y)"', '"x"'))


# ---------------------------------------------------------------------------
# io round trips


def test_monitor_csv_roundtrip(tmp_path, rng):
    path = tmp_path / "mon.csv"
    t = rng.standard_normal(10)
    v = rng.standard_normal(10) * 1e-17
    io.write_monitor_csv(path, {"t": t, "v": v})
    back = io.read_monitor_csv(path)
    assert np.array_equal(back["t"], t)
    assert np.array_equal(back["v"], v)


def test_restore_cell_field_roundtrip(disk32, rng):
    field = np.where(disk32.mask, rng.standard_normal(disk32.mask.shape), 0.0)
    g = disk32.grid
    xc, yc = np.meshgrid(g.xc, g.yc, indexing="ij")
    ii, jj = np.nonzero(disk32.mask)
    out = io.restore_cell_field(disk32, xc[ii, jj], yc[ii, jj],
                                field[ii, jj])
    assert np.array_equal(out, field)


def test_manifest_complete_flag(tmp_path):
    io.write_manifest(tmp_path, {"config": "x"}, complete=False)
    with open(tmp_path / "MANIFEST.json") as f:
        meta = json.load(f)
    assert meta["complete"] is False
    assert meta["files"] == []


def test_config_hash_stability():
    assert io.config_hash("abc") == io.config_hash("abc")
    assert io.config_hash("abc") != io.config_hash("abd")
    assert len(io.config_hash("abc")) == 16


# ---------------------------------------------------------------------------
# command line


def _write_config(tmp_path):
    text = GOOD.replace('directory = "out"',
                        f'directory = "{tmp_path}/out"')
    p = tmp_path / "case.toml"
    p.write_text(text)
    return p


def test_cli_run_and_diag_bit_identical(tmp_path):
    cfgfile = _write_config(tmp_path)
    outdir = str(tmp_path / "out")
    assert cli.main(["run", "--config", str(cfgfile)]) == 0
    names = os.listdir(outdir)
    assert "MANIFEST.json" in names
    assert any(n.startswith("snapshot_") for n in names)
    assert cli.main(["diag", "--out", outdir]) == 0
    for mon in ("gronwall", "max_principle", "norms"):
        a = (tmp_path / "out" / f"{mon}.csv").read_bytes()
        b = (tmp_path / "out" / f"diag_{mon}.csv").read_bytes()
        assert a == b


def test_cli_bad_config_exit_code(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("[domain]\nshape = 'pentagon'\n")
    assert cli.main(["run", "--config", str(p)]) == 2


def test_cli_missing_file_exit_code(tmp_path):
    assert cli.main(["run", "--config", str(tmp_path / "nope.toml")]) == 3
