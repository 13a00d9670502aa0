import csv
import json
import subprocess
import sys

import pytest

from fwmpair.cli import EXPERIMENT_SCHEMA, RATES_SCHEMA, main, default_config_doc

COMMANDS = ("phasematch", "jsa", "hom", "budget")


def run(tmp_path, *argv, name="out"):
    out = tmp_path / name
    code = main([*argv, "--out", str(out)])
    return code, out


def write_config(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def test_phasematch_preset(tmp_path):
    code, out = run(tmp_path, "phasematch", "--preset", "paper")
    assert code == 0
    rows = list(csv.DictReader((out / "phasematch_ss_ff.csv").open()))
    at705 = [r for r in rows if float(r["lambda_p_nm"]) == 705.0][0]
    assert abs(float(at705["lambda_s_nm"]) - 597) <= 2 and abs(float(at705["lambda_i_nm"]) - 860) <= 3
    report = json.loads((out / "factorable_ss_ff.json").read_text())
    assert abs(report["factorable_point"]["lambda_p_nm"] - 705) <= 1


def test_same_axis_phasematch_reports_missing_tangent(tmp_path):
    doc = default_config_doc()
    doc["process"] = "ss->ss"
    code, out = run(tmp_path, "phasematch", "--config", write_config(tmp_path, doc))
    assert code == 0
    report = json.loads((out / "factorable_ss_ss.json").read_text())
    assert report["factorable_point"] is None and "no factorable point" in report["factorable_message"]


def test_negative_length_is_a_config_error(tmp_path, capsys):
    doc = default_config_doc()
    doc["fiber"]["length_m"] = -0.4
    code, _ = run(tmp_path, "phasematch", "--config", write_config(tmp_path, doc))
    assert code == 2
    assert "fiber.length_m" in capsys.readouterr().err


@pytest.mark.parametrize(
    "mutate, field",
    [
        (lambda d: d.update(schema="other/1"), "schema"),
        (lambda d: d["pump"].update(fwhm_nm="wide"), "pump.fwhm_nm"),
        (lambda d: d.update(process="sf->ff"), "process"),
        (lambda d: d["grid"].update(points=4), "grid.points"),
        (lambda d: d["filters"]["idler"][0].update(transmission=1.5), "filters.idler[0]"),
        (lambda d: d["noise"].update(multipair=0.7), "noise"),
        (lambda d: d.update(sources=[{}]), "sources"),
        (lambda d: d["fiber"].update(preset="other"), "fiber.preset"),
    ],
)
def test_field_level_config_errors(tmp_path, capsys, mutate, field):
    doc = default_config_doc()
    mutate(doc)
    code, _ = run(tmp_path, "jsa", "--config", write_config(tmp_path, doc))
    assert code == 2
    assert field in capsys.readouterr().err


def test_missing_and_malformed_config_files(tmp_path):
    assert run(tmp_path, "jsa", "--config", str(tmp_path / "nope.json"))[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(tmp_path, "jsa", "--config", str(bad))[0] == 2


def test_out_of_window_range_is_numeric(tmp_path, capsys):
    code, _ = run(tmp_path, "phasematch", "--lambda-min", "400", "--lambda-max", "420", "--step", "1")
    assert code == 3
    assert "window" in capsys.readouterr().err


def test_phasematch_flag_errors(tmp_path):
    assert run(tmp_path, "phasematch", "--lambda-min", "715", "--lambda-max", "695")[0] == 2
    assert run(tmp_path, "phasematch", "--step", "0")[0] == 2


def test_numeric_errors_in_other_commands(tmp_path):
    doc = default_config_doc()
    doc["pump"]["wavelength_nm"] = 1200.0
    cfg = write_config(tmp_path, doc)
    assert run(tmp_path, "jsa", "--config", cfg)[0] == 3
    assert run(tmp_path, "hom", "--config", cfg)[0] == 3


def test_jsa_outputs(tmp_path):
    code, out = run(tmp_path, "jsa")
    assert code == 0
    doc = json.loads((out / "schmidt.json").read_text())
    assert 1.10 <= doc["K"] <= 1.45
    assert set(doc) >= {"schmidt_probs", "K", "purity"}
    side = json.loads((out / "jsa.json").read_text())
    assert side["n_signal"] == side["n_idler"] == 512
    for name in ("marginal_signal.csv", "marginal_idler.csv"):
        assert (out / name).read_text().startswith("lambda_nm,intensity\n")


def test_wide_grid_matches_config(tmp_path):
    code, out = run(tmp_path, "jsa", "--wide")
    assert code == 0
    rows = (out / "jsa.csv").read_text().strip().split("\n")
    assert len(rows) == 512 and all(len(r.split(",")) == 512 for r in rows)
    assert json.loads((out / "jsa.json").read_text())["span_fwhm"] == 10.0


def test_wide_grid_too_coarse_is_numeric(tmp_path, capsys):
    doc = default_config_doc()
    doc["grid"]["points"] = 300
    code, _ = run(tmp_path, "jsa", "--wide", "--config", write_config(tmp_path, doc))
    assert code == 3
    assert "too coarse" in capsys.readouterr().err


def test_gaussian_phasematch_lowers_k(tmp_path):
    _, sinc = run(tmp_path, "jsa", name="sinc")
    _, gauss = run(tmp_path, "jsa", "--gaussian-phasematch", name="gauss")
    k = lambda d: json.loads((d / "schmidt.json").read_text())["K"]
    assert k(gauss) < k(sinc)


def test_hom_outputs(tmp_path):
    code, out = run(tmp_path, "hom")
    assert code == 0
    fit = json.loads((out / "hom_fit.json").read_text())
    assert 0.73 <= fit["visibility"] <= 0.80
    assert fit["shape"] == "lorentzian" and fit["alternative_fit"]["shape"] == "gaussian"
    assert fit["noise_factor"] == pytest.approx(0.99**3)
    assert (out / "hom_dip.csv").read_text().startswith("delta_t_ps,coincidence_prob\n")


def test_hom_zero_delay_range_is_a_config_error(tmp_path):
    assert run(tmp_path, "hom", "--delta-t-max", "0")[0] == 2


def test_budget_reports_six_fold_rate(tmp_path):
    code, out = run(tmp_path, "budget")
    assert code == 0
    assert json.loads((out / "rates.json").read_text())["rate_hz"] == 5.12


def test_budget_rate_config(tmp_path):
    doc = {"schema": RATES_SCHEMA, "rep_rate_Hz": 80e6, "p_pair": 0.1, "efficiencies": [0.2] * 6,
           "singles_rates_Hz": [1e4, 1e4], "coincidence_window_s": 1e-9}
    code, out = run(tmp_path, "budget", "--config", write_config(tmp_path, doc))
    rep = json.loads((out / "rates.json").read_text())
    assert code == 0 and rep["rate_hz"] == 5.12 and rep["accidental_rate_hz"] == 0.1
    doc["efficiencies"] = [0.2] * 5
    assert run(tmp_path, "budget", "--config", write_config(tmp_path, doc, "odd.json"))[0] == 2
    chains = {"schema": RATES_SCHEMA, "p_pair": 0.1, "chains": [{"stages": [["a", 0.5], ["b", 0.4]]}] * 2}
    code, out = run(tmp_path, "budget", "--config", write_config(tmp_path, chains, "ch.json"), name="ch")
    assert code == 0 and json.loads((out / "rates.json").read_text())["rate_hz"] == pytest.approx(80e6 * 0.1 * 0.04)


def test_ignore_nonlinear_shift(tmp_path):
    _, a = run(tmp_path, "phasematch", name="a")
    _, b = run(tmp_path, "phasematch", "--ignore-nonlinear-shift", name="b")
    ra = json.loads((a / "factorable_ss_ff.json").read_text())
    rb = json.loads((b / "factorable_ss_ff.json").read_text())
    assert rb["peak_power_W"] == 0.0
    assert ra["operating_point"]["lambda_s_nm"] != rb["operating_point"]["lambda_s_nm"]


def test_fiber_from_path(tmp_path, preset):
    fib = tmp_path / "fibre.json"
    preset.to_json(fib)
    doc = default_config_doc()
    doc["fiber"] = {"path": "fibre.json", "length_m": 0.5}
    assert doc["schema"] == EXPERIMENT_SCHEMA
    code, _ = run(tmp_path, "phasematch", "--config", write_config(tmp_path, doc))
    assert code == 0


def _snapshot(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


@pytest.mark.parametrize("command", COMMANDS)
def test_commands_are_byte_deterministic(tmp_path, command):
    _, a = run(tmp_path, command, name="a")
    _, b = run(tmp_path, command, name="b")
    assert _snapshot(a) == _snapshot(b) and _snapshot(a)


def test_thread_cap_does_not_change_output(tmp_path, monkeypatch):
    _, a = run(tmp_path, "phasematch", name="a")
    monkeypatch.setenv("FWM_NUM_THREADS", "3")
    _, b = run(tmp_path, "phasematch", name="b")
    assert _snapshot(a) == _snapshot(b)


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "fwmpair.cli", "budget", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads((tmp_path / "rates.json").read_text())["rate_hz"] == 5.12
