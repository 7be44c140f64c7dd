import csv
import json
from pathlib import Path

import numpy as np
import pytest

from fptmc.cli import main
from fptmc.config import ConfigError, load_config, parse_config

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


def run(*argv):
    return main([str(a) for a in argv])


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


@pytest.mark.parametrize("engine", ["unif", "euler"])
def test_simulate_writes_outputs(tmp_path, engine):
    assert run("simulate", "--config", CONFIGS / "single_a_rated.toml", "--out", tmp_path,
               "--engine", engine, "--runs", 2000) == 0
    for name in ("density.csv", "rates.csv", "timing.csv", "manifest.json"):
        assert (tmp_path / name).exists()
    rates = read_csv(tmp_path / "rates.csv")
    assert list(rates[0]) == ["t", "A"] and len(rates) == 512
    r = np.array([float(row["A"]) for row in rates])
    assert np.all(np.diff(r) >= 0) and 0 <= r[-1] <= 1
    timing = read_csv(tmp_path / "timing.csv")
    assert timing[0]["engine"] == engine and int(timing[0]["n_runs"]) == 2000
    doc = json.loads((tmp_path / "manifest.json").read_text())
    assert doc["seed"] == 20070401 and doc["config"]["engine"]["n_runs"] == 2000


def test_csv_format(tmp_path):
    run("simulate", "--config", CONFIGS / "single_a_rated.toml", "--out", tmp_path, "--runs", 500)
    raw = (tmp_path / "rates.csv").read_bytes()
    raw.decode("utf-8")
    assert raw.endswith(b"\n") and b"\r" not in raw
    assert b";" not in raw and b"," in raw


def test_manifest_reproduces_run(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("simulate", "--config", CONFIGS / "single_a_rated.toml", "--out", a, "--runs", 3000, "--seed", 5) == 0
    assert run("simulate", "--config", a / "manifest.json", "--out", b) == 0
    for name in ("rates.csv", "density.csv", "manifest.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_missing_config_exits_2_without_outputs(tmp_path, capsys):
    out = tmp_path / "out"
    assert run("simulate", "--config", tmp_path / "nope.toml", "--out", out) == 2
    assert "configuration error" in capsys.readouterr().err
    assert not out.exists()


def test_zero_runs_is_config_error(tmp_path):
    assert run("simulate", "--config", CONFIGS / "single_a_rated.toml", "--out", tmp_path / "o", "--runs", 0) == 2
    assert not (tmp_path / "o").exists()


def test_correlate_needs_two_firms(tmp_path, capsys):
    assert run("correlate", "--config", CONFIGS / "single_a_rated.toml", "--out", tmp_path / "o") == 2
    assert "two firms" in capsys.readouterr().err


def test_malformed_historical_names_line(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,rate\n1,0.0\n2,x\n", encoding="utf-8")
    assert run("calibrate", "--config", CONFIGS / "single_a_rated.toml", "--out", tmp_path / "o",
               "--historical", bad) == 2
    assert "bad.csv:3" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_bad_toml_is_config_error(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text("[portfolio\nhorizon = 1", encoding="utf-8")
    assert run("simulate", "--config", p, "--out", tmp_path / "o") == 2


def test_correlate_independent_pair(tmp_path):
    assert run("correlate", "--config", CONFIGS / "independent_pair.toml", "--out", tmp_path) == 0
    rows = read_csv(tmp_path / "correlations.csv")
    assert [float(r["horizon"]) for r in rows] == [1, 2, 5, 10]
    for r in rows:
        assert abs(float(r["rho"])) <= 3 * float(r["stderr"])
        assert "reference_rho" not in r


@pytest.mark.filterwarnings("ignore::fptmc.estimate.DegenerateCorrelationWarning")
def test_correlate_reference_column(tmp_path):
    assert run("correlate", "--config", CONFIGS / "pair_aa.toml", "--out", tmp_path, "--runs", 5000,
               "--horizons", "1,5") == 0
    rows = read_csv(tmp_path / "correlations.csv")
    assert [r["reference_rho"] for r in rows] == ["0", "0.0165"]


def test_calibrate_single_and_pair(tmp_path):
    cfg = (CONFIGS / "single_a_rated.toml").read_text().replace("max_evals = 500", "max_evals = 8") \
        .replace("sim_runs = 20000", "sim_runs = 2000").replace("confirm_runs = 100000", "confirm_runs = 2000")
    p = tmp_path / "c.toml"
    p.write_text(cfg, encoding="utf-8")
    data = ROOT / "data" / "synthetic_a_rated.csv"
    assert run("calibrate", "--config", p, "--out", tmp_path / "s", "--historical", data) == 0
    doc = json.loads((tmp_path / "s" / "calibration.json").read_text())
    assert set(doc["params"]) == {"sigma", "lam", "jump_mean", "jump_sd"}
    assert doc["evaluations"] <= 8 and len(doc["trace"]) == doc["evaluations"]
    assert len(doc["confirmation"]["firms"][0]["model"]) == 10

    pair = (CONFIGS / "pair_aa.toml").read_text().replace("max_evals = 300", "max_evals = 5") \
        .replace("sim_runs = 20000", "sim_runs = 2000").replace("confirm_runs = 100000", "confirm_runs = 2000")
    q = tmp_path / "p.toml"
    q.write_text(pair, encoding="utf-8")
    assert run("calibrate", "--config", q, "--out", tmp_path / "p", "--historical", data, "--mode", "pair") == 0
    doc = json.loads((tmp_path / "p" / "calibration.json").read_text())
    assert set(doc["derived"]) == {"sigma1", "sigma2", "rho12"}


def test_compare_long_format(tmp_path):
    assert run("compare", "--config", CONFIGS / "nojump.toml", "--out", tmp_path, "--runs", 2000) == 0
    rows = read_csv(tmp_path / "compare.csv")
    assert {r["engine"] for r in rows} == {"unif", "euler", "closed_form"}
    timing = read_csv(tmp_path / "timing.csv")
    assert {r["engine"] for r in timing} == {"unif", "euler"}


def test_parse_config_errors():
    base = {"portfolio": {"horizon": 10.0}, "firms": [{"x0": 1.0, "mu": 0.0}], "diffusion": {"rows": [[0.1]]}}
    assert parse_config(base).portfolio.n_firms == 1
    with pytest.raises(ConfigError):
        parse_config({**base, "firms": []})
    with pytest.raises(ConfigError):
        parse_config({**base, "diffusion": {"rows": [[0.0]]}})
    with pytest.raises(ConfigError):
        parse_config({**base, "engine": {"name": "quantum"}})
    with pytest.raises(ConfigError):
        parse_config({**base, "firms": [{"x0": -1.0, "mu": 0.0}]})


def test_shipped_configs_load():
    for p in CONFIGS.glob("*.toml"):
        load_config(p)
