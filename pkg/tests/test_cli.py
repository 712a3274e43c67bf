import csv
import io
import json
import math

import pytest

from fdsecrecy.cli import SweepSpec, apply_variable, main, run_sweep
from fdsecrecy.model import ConfigError, SystemParams, db_to_linear

FAST_CFG = """
n_fading_points = 4
search_levels = 8
search_screen_points = 3
search_top_k = 2
sim_slots = 500
sim_burn_in = 10
"""


@pytest.fixture
def cfg(tmp_path):
    f = tmp_path / "fast.cfg"
    f.write_text(FAST_CFG)
    return f


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_bounds_command(cfg, capsys):
    assert main(["bounds", "--config", str(cfg)]) == 0
    rows = _rows(capsys.readouterr().out)
    assert len(rows) == 1
    r = rows[0]
    assert float(r["c_s_upper_bits"]) >= float(r["c_s_lower_bits"]) - 1e-6 / math.log(2)
    assert float(r["c_s_lower_bits"]) >= float(r["hd_rate_bits"]) >= 0
    assert r["case_label"] in ("Case1", "Case2") and r["error"] == ""
    assert 0 <= float(r["sim_fraction_active"]) <= 1


def test_sweep_zero_power_row(cfg, tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--config", str(cfg), "--variable", "p_et_dbm",
                 "--values=-inf,0", "--out", str(out)]) == 0
    rows = _rows(out.read_text())
    assert [r["value"] for r in rows] == ["-inf", "0.0"]
    z = rows[0]
    assert float(z["c_s_upper_bits"]) == 0 and float(z["c_s_lower_bits"]) == 0
    assert float(z["hd_rate_bits"]) == 0 and z["case_label"] == "Case3"


def test_sweep_deterministic_modulo_runtime(cfg, tmp_path):
    spec = SweepSpec("eta", (0.5, 0.8))
    a = run_sweep(cfg, spec, tmp_path / "a.csv")
    b = run_sweep(cfg, spec, tmp_path / "b.csv")
    strip = [{k: v for k, v in r.items() if k != "runtime_ms"} for r in a]
    assert strip == [{k: v for k, v in r.items() if k != "runtime_ms"} for r in b]

    def body(p):
        return [line.rsplit(",", 2)[0] for line in p.read_text().splitlines()]

    assert body(tmp_path / "a.csv") == body(tmp_path / "b.csv")


def test_nats_flag(cfg, capsys):
    main(["bounds", "--config", str(cfg), "--nats", "--outputs", "lower"])
    nats = _rows(capsys.readouterr().out)[0]
    main(["bounds", "--config", str(cfg), "--outputs", "lower"])
    bits = _rows(capsys.readouterr().out)[0]
    assert float(nats["c_s_lower_nats"]) == pytest.approx(
        float(bits["c_s_lower_bits"]) * math.log(2))


def test_row_errors_are_isolated(cfg, capsys):
    assert main(["sweep", "--config", str(cfg), "--variable", "eta",
                 "--values", "0.5,1.5", "--outputs", "lower"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert rows[0]["error"] == ""
    assert "ConfigError" in rows[1]["error"]


def test_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("eta = 0.9\nqbar1 = 1.2\n")
    assert main(["verify", "--config", str(bad)]) == 2
    assert "config error" in capsys.readouterr().err
    assert main(["bounds", "--config", str(tmp_path / "missing.cfg")]) == 2
    bad.write_text("eta = 0.5\nnot_a_key = 3\n")
    assert main(["bounds", "--config", str(bad)]) == 2
    assert ":2:" in capsys.readouterr().err


def test_sweep_needs_variable(cfg):
    assert main(["sweep", "--config", str(cfg)]) == 2
    with pytest.raises(ConfigError):
        SweepSpec("nope", (1.0,))
    with pytest.raises(ConfigError):
        SweepSpec("eta", ())


def test_printed_formulas_runs(cfg, capsys):
    assert main(["bounds", "--config", str(cfg), "--printed-formulas",
                 "--outputs", "upper,lower,hd"]) == 0
    r = _rows(capsys.readouterr().out)[0]
    assert float(r["c_s_upper_bits"]) >= float(r["c_s_lower_bits"]) - 1e-6


def test_simulate_command(cfg, tmp_path, capsys):
    trace = tmp_path / "trace.csv"
    assert main(["simulate", "--config", str(cfg), "--slots", "300", "--slack", "0.1",
                 "--trace", str(trace)]) == 0
    summ = json.loads(capsys.readouterr().out)
    assert summ["N_active"] + summ["B_silent"] == 300
    assert trace.read_text().startswith("slot,v_sq,battery_J,e_in_J,e_out_J,active")


def test_verify_command(cfg, tmp_path):
    out = tmp_path / "rep.json"
    code = main(["verify", "--config", str(cfg), "--fading-points", "4", "--out", str(out)])
    rep = json.loads(out.read_text())
    assert code == (0 if rep["passed"] else 3)
    assert rep["passed"], [c for c in rep["checks"] if not c["passed"]]
    assert {c["name"] for c in rep["checks"]} >= {"bound_ordering", "bound_ordering_printed",
                                                  "leakage_integral_vs_closed_form"}


def test_apply_variable():
    p = SystemParams()
    assert apply_variable(p, "qbar1_db", -3).qbar1 ** 2 == pytest.approx(db_to_linear(-3))
    assert apply_variable(p, "alpha1_db", -20).alpha1 == pytest.approx(1e-2)
    assert apply_variable(p, "p_et_dbm", -math.inf).p_et == 0.0
    assert apply_variable(p, "d_ehu_eve", 9).d_ehu_eve == 9
