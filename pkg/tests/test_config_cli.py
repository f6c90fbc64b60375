import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aniso_qft.background import ModelKind
from aniso_qft.cli import cmd_modes, cmd_spectrum, cmd_tensor, main
from aniso_qft.config import ConfigError, load_config, parse_config, suggest_key
from aniso_qft.tables import MODES_COLUMNS, SPECTRUM_COLUMNS, TENSOR_COLUMNS, Table, read_table

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

MINIMAL = """
model.kind = Static
window.eta0 = 0
window.eta1 = 1
mode.k = 1
"""

TANH_HEAD = """
model.kind = TanhStep
model.A1 = 2
model.A2 = 2
model.A3 = 2
model.B1 = 0.5
model.B2 = -0.5
model.B3 = 0
mass = 1
window.eta0 = -10
window.eta1 = 10
"""


# -- config ----------------------------------------------------------------

def test_minimal_document_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.model.kind is ModelKind.STATIC
    assert cfg.tol_ode == 1e-10 and cfg.tol_quad == 1e-6
    assert cfg.tii_variant == "printed"
    assert cfg.output_times == (1.0,)
    assert cfg.mode.k == 1.0 and cfg.mass == 0.0
    assert cfg.output_format == "csv"


def test_reversed_window_names_window():
    with pytest.raises(ConfigError, match="window"):
        parse_config(MINIMAL.replace("window.eta1 = 1", "window.eta1 = -1"))


def test_unknown_key_suggestion():
    with pytest.raises(ConfigError, match="did you mean 'model'"):
        parse_config(MINIMAL + "modle = Static\n")
    with pytest.raises(ConfigError, match="'model.kind'"):
        parse_config("modle.kind = Static\n")
    assert suggest_key("grid.nthteta") == "grid.ntheta"
    assert suggest_key("completely_unrelated_setting") is None


@pytest.mark.parametrize("extra,match", [
    ("tol.ode = 0.1\n", "tol.ode"),
    ("tol.quad = 0\n", "tol.quad"),
    ("output_times = [5]\n", "output_times"),
    ("tii_variant = cubed\n", "tii_variant"),
    ("model.q1 = 1\n", "not a parameter"),
    ("mass = -1\n", "mass"),
    ("grid.nphi = 7\n", "grid"),
    ("window.eta0 = 2\n", "duplicate"),
    ("output.format = xml\n", "output.format"),
    ("mode.k = [1, 2]\n", "duplicate"),
    ("spectrum.n_k = 2.5\n", "spectrum.n_k"),
    ("just some words\n", "line"),
])
def test_validation_errors(extra, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(MINIMAL + extra)


def test_power_law_window_must_be_positive():
    doc = "model.kind = PowerLaw\nmodel.q1 = 1\nmodel.q2 = 1\nmodel.q3 = 1\nwindow.eta0 = 0\nwindow.eta1 = 1\n"
    with pytest.raises(ConfigError, match="window"):
        parse_config(doc)


def test_tabulated_model_from_csv(tmp_path):
    eta = np.linspace(0, 2, 9)
    rows = "\n".join(f"{e},{1 + e},{1 + 0.5 * e},1" for e in eta)
    (tmp_path / "bg.csv").write_text("eta,alpha1,alpha2,alpha3\n" + rows + "\n")
    (tmp_path / "run.cfg").write_text("model.kind = Tabulated\nmodel.table = bg.csv\n"
                                      "window.eta0 = 0\nwindow.eta1 = 2\n")
    cfg = load_config(tmp_path / "run.cfg")
    assert cfg.model.kind is ModelKind.TABULATED
    np.testing.assert_allclose(cfg.model.scale_factors(1.0)[0], [2.0, 1.5, 1.0])
    (tmp_path / "bad.cfg").write_text("model.kind = Tabulated\nmodel.table = bg.csv\n"
                                      "window.eta0 = 0\nwindow.eta1 = 3\n")
    with pytest.raises(ConfigError, match="window"):
        load_config(tmp_path / "bad.cfg")


def test_shipped_configs_parse():
    for path in sorted(CONFIGS.glob("*.cfg")):
        load_config(path)


# -- commands --------------------------------------------------------------

def test_static_modes_are_zero():
    table = cmd_modes(load_config(CONFIGS / "static_mode.cfg"))
    assert table.columns == MODES_COLUMNS
    for name in ("S", "U", "V"):
        assert max(abs(x) for x in table.column(name)) == 0


def test_modes_constraint_column():
    table = cmd_modes(load_config(CONFIGS / "tanh_mode.cfg"))
    S = np.array(table.column("S"))
    assert np.all(np.array(table.column("constraint_residual")) <= 1e-8 * (1 + S) ** 2)
    assert table.column("eta") == [-10, -5, -2, -1, 0, 1, 2, 5, 10]


def test_modes_needs_a_mode():
    with pytest.raises(ConfigError):
        cmd_modes(parse_config(TANH_HEAD))


def test_spectrum_static_zero():
    cfg = parse_config(MINIMAL.replace("mode.k = 1", "spectrum.n_k = 6"))
    table = cmd_spectrum(cfg)
    assert table.columns == SPECTRUM_COLUMNS and len(table.rows) == 6
    assert max(table.column("S_final")) == 0


def test_spectrum_anisotropy_creates_more_particles():
    grid = "spectrum.k_max = 3\nspectrum.n_k = 8\nspectrum.theta = 1.0\nspectrum.phi = 0.5\n"
    aniso = parse_config(TANH_HEAD.replace("mass = 1", "mass = 0") + grid)
    iso = parse_config(TANH_HEAD.replace("mass = 1", "mass = 0").replace("B2 = -0.5", "B2 = 0.5")
                       .replace("B3 = 0", "B3 = 0.5") + grid)
    S_aniso = np.array(cmd_spectrum(aniso).column("S_final"))
    S_iso = np.array(cmd_spectrum(iso).column("S_final"))
    assert np.any(S_aniso > S_iso)


def test_spectrum_tail_decreases():
    table = cmd_spectrum(load_config(CONFIGS / "tanh_spectrum.cfg"))
    k = np.array(table.column("k"))
    S = np.array(table.column("S_final"))
    assert np.all(np.diff(S[k >= 1.0]) < 0)


def test_spectrum_angular_grid():
    cfg = parse_config(MINIMAL.replace("mode.k = 1", "spectrum.n_k = 2\nspectrum.angular_grid = true\n"
                                       "grid.ntheta = 2\ngrid.nphi = 4"))
    assert len(cmd_spectrum(cfg).rows) == 2 * 2 * 4


def test_tensor_static_rows_zero():
    cfg = parse_config(MINIMAL.replace("mode.k = 1", "grid.kmax = 2\ngrid.npanels = 2\ngrid.nk = 4\n"
                                       "grid.ntheta = 4\ngrid.nphi = 8\ngrid.max_refine = 1"))
    table = cmd_tensor(cfg)
    assert table.columns == TENSOR_COLUMNS
    row = dict(zip(table.columns, table.rows[0]))
    assert all(row[c] == 0 for c in ("T00", "T11", "T22", "T33", "trace"))
    assert row["converged"] == 1


def test_tensor_massless_and_isotropic():
    grid = "grid.kmax = 3\ngrid.npanels = 3\ngrid.nk = 4\ngrid.ntheta = 4\ngrid.nphi = 8\ngrid.max_refine = 0\n"
    massless = parse_config(TANH_HEAD.replace("mass = 1", "mass = 0") + "output_times = [0, 5]\n" + grid)
    for row in cmd_tensor(massless).rows:
        r = dict(zip(TENSOR_COLUMNS, row))
        assert abs(r["trace"]) <= 1e-6 * max(abs(r["T00"]), 1e-30)
    iso = parse_config(TANH_HEAD.replace("B2 = -0.5", "B2 = 0.5").replace("B3 = 0", "B3 = 0.5") + grid)
    r = dict(zip(TENSOR_COLUMNS, cmd_tensor(iso).rows[0]))
    assert abs(r["T11"] - r["T22"]) <= 1e-6 * abs(r["T11"])
    assert abs(r["T22"] - r["T33"]) <= 1e-6 * abs(r["T11"])


# -- tables ----------------------------------------------------------------

finite = st.floats(allow_nan=False, allow_infinity=False)


@given(st.lists(st.tuples(finite, finite, st.integers(0, 1)), max_size=10))
def test_csv_round_trip(rows):
    table = Table(("a", "b", "flag"), [tuple(r) for r in rows])
    back = read_table(table.to_csv(), "csv")
    assert back.columns == table.columns
    assert back.rows == table.rows


@given(st.lists(st.tuples(finite, st.integers(0, 1)), max_size=10))
def test_json_round_trip(rows):
    table = Table(("x", "converged"), [tuple(r) for r in rows])
    back = read_table(table.to_json(), "json")
    assert back.rows == table.rows


def test_csv_layout():
    text = Table(("eta", "S"), [(0.1, 1e-20)]).to_csv()
    assert text == "eta,S\n0.10000000000000001,9.9999999999999995e-21\n"


# -- entry point -----------------------------------------------------------

def test_main_writes_csv(tmp_path, capsys):
    out = tmp_path / "modes.csv"
    assert main(["modes", "--config", str(CONFIGS / "tanh_mode.cfg"), "--output", str(out)]) == 0
    table = read_table(out.read_text())
    assert table.columns == MODES_COLUMNS and len(table.rows) == 9
    assert b"\r\n" not in out.read_bytes()


def test_main_json_stdout(capsys):
    assert main(["modes", "--config", str(CONFIGS / "static_mode.cfg"), "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["columns"] == list(MODES_COLUMNS)


def test_main_bad_config(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text(MINIMAL + "modle = 1\n")
    assert main(["modes", "--config", str(bad)]) == 2
    assert "model" in capsys.readouterr().err
    assert main(["modes", "--config", str(tmp_path / "missing.cfg")]) == 2


def test_verify_subset(capsys):
    assert main(["verify", "--only", "vacuum", "--only", "phi_trapezoid_exact"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["passed"]
    assert {c["name"] for c in report["checks"]} == {"vacuum_modes", "vacuum_tensor", "phi_trapezoid_exact"}


def test_verify_flags_injected_sign_flip(capsys):
    assert main(["verify", "--only", "constraint_preservation", "--inject", "flip-dv"]) == 1
    report = json.loads(capsys.readouterr().out)
    (check,) = report["checks"]
    assert not check["passed"] and check["gating"]


def test_verify_reports_uv_pairing_without_failing(capsys):
    assert main(["verify", "--only", "uv_pairing", "--format", "csv"]) == 0
    table = read_table(capsys.readouterr().out)
    rows = {r[0]: dict(zip(table.columns, r)) for r in table.rows}
    assert rows["uv_pairing_printed"]["passed"] == 0 and rows["uv_pairing_printed"]["gating"] == 0
    assert rows["uv_pairing_consistent"]["passed"] == 1


def test_verify_unknown_check(capsys):
    assert main(["verify", "--only", "nonsense"]) == 2


def test_console_script_runs():
    res = subprocess.run([sys.executable, "-m", "aniso_qft.cli", "modes", "--config",
                          str(CONFIGS / "static_mode.cfg")], capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.startswith(",".join(MODES_COLUMNS) + "\n")
