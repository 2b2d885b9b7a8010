import json
import math

import pytest

from randgibbs.cli import EXIT_BUDGET, EXIT_CONFIG, EXIT_OK, EXIT_VERIFY, RunConfig, main, parse_grid, parse_radii
from randgibbs.cli import ConfigError


@pytest.fixture
def out(tmp_path, monkeypatch):
    monkeypatch.setenv("RANDGIBBS_OUT", str(tmp_path))
    return tmp_path


def _rows(path):
    lines = [x for x in path.read_text().splitlines() if not x.startswith("#")]
    return [x.split(",") for x in lines[1:]]


def test_parse_grids():
    assert parse_grid("-1:1:5") == (-1.0, -0.5, 0.0, 0.5, 1.0)
    assert parse_grid("4,8,12", integer=True) == (4, 8, 12)
    assert parse_radii("3^5..7") == pytest.approx((3.0**-7, 3.0**-6, 3.0**-5))
    with pytest.raises(ConfigError):
        parse_grid("a:b:c")


def test_run_config_validation():
    with pytest.raises(ConfigError):
        RunConfig(q_grid=(1.0, 0.0))
    with pytest.raises(ConfigError):
        RunConfig(threads=0)
    with pytest.raises(ConfigError):
        RunConfig(potential="chi")


def test_pressure_zero_potential(out):
    code = main(["pressure", "--potential", "zero", "--depths", "4,8"])
    assert code == EXIT_OK
    rows = _rows(out / "pressure.csv")
    assert rows[-1][0] == "extrapolated"
    assert float(rows[-1][1]) == pytest.approx(math.log(2))
    assert (out / "pressure_rep0.csv").exists()


def test_pressure_replicas(out):
    code = main(["pressure", "--scenario", "example_three_state", "--depths", "4,6", "--replicas", "3",
                 "--horizon", "12"])
    assert code == EXIT_OK
    text = (out / "pressure.csv").read_text()
    assert "# replicas: 3" in text and "# stderr:" in text
    assert (out / "pressure_rep2.csv").exists()


def test_tq_header_and_root(out):
    assert main(["tq", "--q-grid=-1:1:3", "--scenario", "cookie_cutter"]) == EXIT_OK
    path = out / "tq.csv"
    text = path.read_text()
    for key in ("# randgibbs", "# command: tq", "# scenario:", "# seed:", "# horizon:", "# depths:", "# q_grid:"):
        assert key in text
    assert "thread" not in text
    rows = {float(r[0]): float(r[1]) for r in _rows(path)}
    assert rows[1.0] == pytest.approx(0.0, abs=1e-12)
    assert rows[0.0] == pytest.approx(-math.log(2) / math.log(3), abs=1e-8)


def test_single_q(out):
    assert main(["tq", "--q-grid", "1"]) == EXIT_OK
    assert float(_rows(out / "tq.csv")[0][1]) == pytest.approx(0.0, abs=1e-12)


def test_legendre_and_diagnostics(out):
    assert main(["legendre", "--scenario", "cookie_cutter_unequal"]) == EXIT_OK
    assert "extrapolated_endpoints" in (out / "tstar.csv").read_text()
    assert main(["diagnostics", "--scenario", "cookie_cutter"]) == EXIT_OK
    diag = json.loads((out / "diagnostics.json").read_text())
    assert diag["c_psi"] == pytest.approx(math.log(3))


def test_spectrum_summary_cookie_unequal(out):
    code = main(["spectrum", "--scenario", "cookie_cutter_unequal", "--radii", "3^5..12",
                 "--resolution", "0.1111111111111111"])
    assert code == EXIT_OK
    summary = json.loads((out / "summary.json").read_text())
    assert summary["passed"], summary["checks"]
    assert all(c["graded"] for c in summary["checks"].values())
    for name in ("tq.csv", "tstar.csv", "tau_hat.csv", "ld_lower.csv", "ld_upper.csv", "spectrum.dat",
                 "predictions.json"):
        assert (out / name).exists()


def test_lq_and_ld_commands(out):
    args = ["--scenario", "cookie_cutter", "--radii", "3^5..12", "--resolution", "0.1111111111111111"]
    assert main(["lq-empirical", *args]) == EXIT_OK
    assert main(["ld", *args]) == EXIT_OK
    assert "radii:" in (out / "ld_lower.csv").read_text()


def test_too_shallow_weights_is_config_error(out, capsys):
    assert main(["lq-empirical", "--radii", "3^5..12"]) == EXIT_CONFIG
    assert "error [too-shallow-weights]" in capsys.readouterr().err


def test_missing_scenario(out):
    assert main(["tq", "--scenario", "nowhere.json"]) == EXIT_CONFIG


def test_config_file(out, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"scenario": "full_interval", "q_grid": [0.0, 1.0], "colour": 1}))
    assert main(["tq", "--config", str(cfg)]) == EXIT_CONFIG
    cfg.write_text(json.dumps({"scenario": "full_interval", "q_grid": [0.0, 1.0]}))
    assert main(["tq", "--config", str(cfg), "--q-grid", "0,2"]) == EXIT_OK
    assert [float(r[0]) for r in _rows(out / "tq.csv")] == [0.0, 2.0]


def test_budget_exit_code(out):
    assert main(["pressure", "--depths", "4,40", "--horizon", "64"]) == EXIT_BUDGET


def test_verify_bad_scenario(out, capsys):
    bad = out / "bad.json"
    bad.write_text(json.dumps({
        "name": "bad",
        "base": {"kind": "deterministic", "pattern": [0], "horizon": 32},
        "model": "table",
        "fibers": {"0": {"intervals": [[0, 0.3], [0.5, 1]],
                         "profiles": [{"kind": "polynomial", "coeffs": [0, 2, -1.5]}, {"kind": "affine"}]}},
        "phi": {"kind": "uniform"},
    }))
    assert main(["verify", "--scenario", str(bad)]) == EXIT_VERIFY
    assert "FAILED: non-monotone-branch" in capsys.readouterr().err
    report = json.loads((out / "verify.json").read_text())
    assert report["passed"] is False


def test_verify_selected_criteria(out):
    assert main(["verify", "--criteria", "1,10"]) == EXIT_OK
    report = json.loads((out / "verify.json").read_text())
    assert [r["number"] for r in report["results"]] == [1, 10]


def test_verify_zero_tolerance_fails(out):
    assert main(["verify", "--criteria", "2", "--tolerance-scale", "0"]) == EXIT_VERIFY
