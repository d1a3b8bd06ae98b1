import csv
import json

import pytest

from servipricer import io as sio
from servipricer.cli import main
from servipricer.model import table3_params


@pytest.fixture
def config(tmp_path):
    doc = sio.params_to_dict(table3_params())
    doc.update(n=120, t_obs="fixed:5", seed=4, plan="c")
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    return path


def test_simulate_is_byte_identical_and_writes_manifest(tmp_path, config):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["simulate", "--config", str(config), "--out", str(a)]) == 0
    assert main(["simulate", "--config", str(config), "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    manifest = json.loads((tmp_path / "a.csv.manifest.json").read_text())
    assert manifest["seed"] == 4 and manifest["rows"] == len(a.read_text().splitlines()) - 1
    rows = list(csv.DictReader(a.open()))
    assert sum(r["event_type"] == "m" for r in rows) == 120 * 5
    assert sio.read_dataset(a).n_machines == 120


def test_seed_flag_changes_output(tmp_path, config):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["simulate", "--config", str(config), "--out", str(a)])
    main(["simulate", "--config", str(config), "--out", str(b), "--seed", "5"])
    assert a.read_bytes() != b.read_bytes()


def test_malformed_config_exits_one_without_output(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"n": 3,')
    out = tmp_path / "x.csv"
    assert main(["simulate", "--config", str(bad), "--out", str(out)]) == 1
    assert not out.exists()


def test_missing_and_empty_data_exit_two(tmp_path, capsys):
    assert main(["calibrate", "--data", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "f.json")]) == 2
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["calibrate", "--data", str(empty), "--out", str(tmp_path / "f.json")]) == 2
    assert "no events" in capsys.readouterr().err


def test_usage_errors_exit_one(tmp_path, config):
    with pytest.raises(SystemExit) as exc:
        main(["price", "--params", str(config), "--plan", "z", "--out", "p.csv"])
    assert exc.value.code == 1
    assert main(["price", "--params", str(config), "--duration", "0", "--out", str(tmp_path / "p.csv")]) == 1
    assert main(["recover", "--config", str(config), "--replications", "1", "--out", str(tmp_path / "r.json")]) == 1


def test_full_command_chain(tmp_path, config):
    data, oot = tmp_path / "in.csv", tmp_path / "oot.csv"
    assert main(["simulate", "--config", str(config), "--out", str(data)]) == 0
    assert main(["simulate", "--config", str(config), "--out", str(oot), "--seed", "77",
                 "--profiles-from", str(data)]) == 0
    tariffs = []
    for plan in "ac":
        fit = tmp_path / f"fit_{plan}.json"
        assert main(["calibrate", "--data", str(data), "--plan", plan, "--out", str(fit)]) == 0
        report = json.loads(fit.read_text())
        assert report["plan"] == plan and report["params"] is not None
        assert {"parameter", "estimate", "std_error", "ci_lower", "ci_upper"} <= set(report["table"][0])
        prices = tmp_path / f"price_{plan}.csv"
        assert main(["price", "--params", str(fit), "--plan", plan, "--paths", "500", "--out", str(prices)]) == 0
        rows = list(csv.DictReader(prices.open()))
        assert len(rows) == 32
        if plan == "a":
            assert len({r["price"] for r in rows}) == 1
        tariffs += ["--tariff", f"{plan}={prices}"]
    out = tmp_path / "report.json"
    plots = tmp_path / "plots"
    assert main(["evaluate", "--in-time", str(data), "--out-of-time", str(oot), *tariffs,
                 "--out", str(out), "--plot-dir", str(plots)]) == 0
    report = json.loads(out.read_text())
    assert set(report["tariffs"]) == {"a", "c"}
    assert (plots / "lorenz_a.csv").exists()


def test_identical_tariffs_have_zero_ordered_gini(tmp_path, config):
    data = tmp_path / "in.csv"
    main(["simulate", "--config", str(config), "--out", str(data)])
    prices = tmp_path / "p.csv"
    main(["price", "--params", str(config), "--plan", "c", "--paths", "200", "--out", str(prices)])
    out = tmp_path / "r.json"
    assert main(["evaluate", "--in-time", str(data), "--out-of-time", str(data), "--tariff", f"x={prices}",
                 "--tariff", f"y={prices}", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["ordered"]["x_vs_y"]["ordered_gini"] == 0.0
    assert main(["evaluate", "--in-time", str(data), "--out-of-time", str(tmp_path / "none.csv"),
                 "--tariff", f"x={prices}", "--out", str(out)]) == 2


def test_recover_small(tmp_path, config):
    out = tmp_path / "rec.json"
    assert main(["recover", "--config", str(config), "--replications", "2", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["replications"] == 2 and doc["succeeded"] + doc["failed"] == 2
    assert {p["name"] for p in doc["parameters"]} >= {"alpha0", "theta", "gamma_c.scale"}
