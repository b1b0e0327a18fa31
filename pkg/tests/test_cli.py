import json
import subprocess
import sys

import numpy as np
import pytest

from inhomlimit import acceptance, cli
from inhomlimit.acceptance import CriterionResult
from inhomlimit.errors import ParseError, ValidationError
from inhomlimit.scheme import PRESET_DEFAULTS

FAST = ["--grid-nodes", "1001"]


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_defaults_are_filled():
    cfg = cli.parse_config("{}", command="plan")
    doc = cfg.document
    assert doc["grid"] == {"nodes": 4001, "span": 5.0}
    assert doc["scheme"]["preset"] == "n_type"
    params = doc["scheme"]["params"]
    assert set(params) == set(PRESET_DEFAULTS["n_type"])
    assert params["probe_rabi"] == pytest.approx(0.01 * params["gamma"])
    assert doc["plan"] == {"omega": 29.0, "delta": -270.0, "eta": 1.0}


def test_misspelled_key_names_path():
    with pytest.raises(ValidationError, match="sigmma"):
        cli.parse_config('{"scheme": {"preset": "n_type", "params": {"sigmma": 3}}}')
    with pytest.raises(ValidationError, match="grid"):
        cli.parse_config('{"grid": {"nodez": 11}}')
    with pytest.raises(ValidationError):
        cli.parse_config('{"colour": 1}')


def test_parse_error_location():
    with pytest.raises(ParseError, match=r"run\.json:2:"):
        cli.parse_config('{"grid":\n  {nodes: 3}}', source="run.json")


def test_flag_overrides_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"scheme": {"preset": "n_type", "params": {"delta_r": -280.0}},
                                "grid": {"nodes": 1001}}))
    args = cli.build_parser().parse_args(["spectrum", "--config", str(path), "--delta-r", "-290"])
    cfg = cli._load(args)
    assert cfg.scheme.field("recovery").detuning == -290.0
    assert cfg.grid.size == 1001
    args = cli.build_parser().parse_args(["spectrum", "--config", str(path)])
    assert cli._load(args).scheme.field("recovery").detuning == -280.0


def test_scheme_file(tmp_path):
    from inhomlimit.scheme import preset

    s = preset("lambda")
    (tmp_path / "s.json").write_text(s.to_json())
    (tmp_path / "run.json").write_text('{"scheme": {"file": "s.json"}}')
    args = cli.build_parser().parse_args(["spectrum", "--config", str(tmp_path / "run.json")])
    assert cli._load(args).scheme == s


def test_plan_command(capsys):
    code, out, _ = run_cli(capsys, "plan", "--omega", "29", "--delta", "-270", "--eta", "1")
    assert code == 0
    assert json.loads(out) == {"omega_r": 29.0, "delta_r": -270.0, "eta": 1.0}


def test_predict_command(capsys):
    code, out, _ = run_cli(capsys, "predict", "--omega-r", "29.6", "--delta-r", "-300",
                           "--gamma-r", "3.033")
    assert code == 0
    d = json.loads(out)
    assert round(d["beta"], 2) == 3.13 and round(d["beta0"], 2) == 61.06


def test_exit_codes(capsys):
    assert run_cli(capsys, "plan", "--eta", "0")[0] == 1
    assert run_cli(capsys, "plan", "--set", "plan.omgea=3")[0] == 1
    assert run_cli(capsys, "plan", "--sigma-r", "3")[0] == 1
    with pytest.raises(SystemExit) as exc:
        cli.main(["plan", "--bogus"])
    assert exc.value.code == 2
    capsys.readouterr()


def test_spectrum_without_coupling_is_two_level(capsys):
    common = FAST + ["--range", "-300", "100", "--points", "9"]
    _, a, _ = run_cli(capsys, "spectrum", "--preset", "lambda", "--omega", "0", *common)
    _, b, _ = run_cli(capsys, "spectrum", "--preset", "two_level", *common)
    ya = np.loadtxt(a.splitlines()[1:], delimiter=",")
    yb = np.loadtxt(b.splitlines()[1:], delimiter=",")
    np.testing.assert_allclose(ya, yb, atol=1e-6, rtol=0)


def test_spectrum_bytes_independent_of_workers(tmp_path, capsys):
    common = ["spectrum", *FAST, "--range", "-280", "-260", "--points", "5"]
    assert run_cli(capsys, *common, "--workers", "1", "-o", str(tmp_path / "a.csv"))[0] == 0
    assert run_cli(capsys, *common, "--workers", "3", "-o", str(tmp_path / "b.csv"))[0] == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_sweep_command(tmp_path, capsys):
    code, _, _ = run_cli(capsys, "sweep", *FAST, "--axis", "delta_r", "-280", "-260", "3",
                         "-o", str(tmp_path))
    assert code == 0
    rows = (tmp_path / "sweep.csv").read_text().splitlines()
    assert rows[0] == "delta_r,beta,error" and len(rows) == 4
    manifest = json.loads((tmp_path / "sweep_manifest.json").read_text())
    assert manifest["failed_rows"] == 0
    assert run_cli(capsys, "sweep", *FAST, "-o", str(tmp_path))[0] == 1


def test_figure_command(tmp_path, capsys):
    assert run_cli(capsys, "figure", "fig3b", "--resolution", "draft", "-o", str(tmp_path))[0] == 0
    assert (tmp_path / "fig3b_beta_vs_delta_r.csv").exists()
    assert (tmp_path / "fig3b_manifest.json").exists()


def test_print_config(capsys):
    code, _, err = run_cli(capsys, "plan", "--delta", "-300", "--print-config")
    assert code == 0
    assert json.loads(err)["plan"]["delta"] == -300.0


def test_selftest_passing(capsys):
    code, out, _ = run_cli(capsys, "selftest", "--criteria", "1", "2")
    assert code == 0
    assert out.count("[PASS]") == 2 and "2/2 criteria passed" in out


def test_selftest_failure_sets_status(monkeypatch, capsys):
    def fake(numbers=None, workers=None, report=print, run=None):
        res = [CriterionResult(1, "stub", True, "ok"), CriterionResult(2, "stub", False, "no")]
        for r in res:
            report(r.line())
        return res

    monkeypatch.setattr(acceptance, "run_acceptance", fake)
    code, out, _ = run_cli(capsys, "selftest")
    assert code == 1
    assert "[FAIL] criterion 2" in out and "failed: [2]" in out


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "inhomlimit", "plan", "--omega", "20"],
                         capture_output=True, text=True, check=True).stdout
    assert json.loads(out)["omega_r"] == 20.0
