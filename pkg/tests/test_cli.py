import json

import numpy as np
import pytest

from dynamo.cli import EXIT_DATA, EXIT_NONCONVERGED, EXIT_OK, EXIT_USAGE, main, parse_float_list, parse_index_list


def test_list_parsers():
    assert parse_index_list("1,30,60,90") == [1, 30, 60, 90]
    assert parse_index_list("10:40:10") == [10, 20, 30, 40]
    assert parse_index_list("5,10:12") == [5, 10, 11, 12]
    assert parse_float_list("0.1:0.9:0.1") == [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
    assert parse_float_list("0.3,0.9") == [0.3, 0.9]


@pytest.fixture(scope="module")
def simulated(tmp_path_factory):
    d = tmp_path_factory.mktemp("sim")
    data, truth = d / "x.csv", d / "truth.json"
    assert main(["simulate", "--d", "4", "--T", "150", "--seed", "2", "--out", str(data),
                 "--truth", str(truth)]) == EXIT_OK
    return d, data, truth


def test_simulate_outputs(simulated):
    d, data, truth = simulated
    t = json.loads(truth.read_text())
    assert len(t["graphs"]) == 150 and t["graphs"][0]["t"] == 1
    m = json.loads((d / "x.csv.manifest.json").read_text())
    assert m["subcommand"] == "simulate" and m["seed"] == 2 and "version" in m


def test_fit_eval_predict_pipeline(simulated):
    d, data, truth = simulated
    fits = d / "fits.json"
    assert main(["fit", "--input", str(data), "--t", "50:150:50", "--bandwidth", "0.4",
                 "--profile", "simulation", "--out", str(fits)]) == EXIT_OK
    out = json.loads(fits.read_text())
    assert [f["t"] for f in out["fits"]] == [50, 100, 150]
    f0 = out["fits"][0]
    for key in ("t", "bandwidth", "W", "A", "loss", "eta", "converged"):
        assert key in f0
    W = np.array(f0["W"])
    assert np.all((W == 0) | (np.abs(W) >= 0.05))

    report = d / "eval.json"
    assert main(["eval", "--est", str(fits), "--truth", str(truth), "--out", str(report)]) == EXIT_OK
    r = json.loads(report.read_text())
    assert {"instantaneous", "lagged"} <= set(r["per_t"][0])

    mse = d / "mse.json"
    assert main(["predict", "--fits", str(fits), "--input", str(data), "--target", "v4",
                 "--out", str(mse)]) == EXIT_OK
    assert json.loads(mse.read_text())["mse"] >= 0


def test_cv_subcommand(simulated):
    d, data, _ = simulated
    out = d / "cv.json"
    assert main(["cv", "--input", str(data), "--t", "75", "--grid", "0.3,0.9", "--folds", "3",
                 "--profile", "simulation", "--out", str(out)]) == EXIT_OK
    res = json.loads(out.read_text())["results"][0]
    assert res["bandwidth"] in (0.3, 0.9)


def test_strict_nonconvergence_exit(simulated):
    d, data, _ = simulated
    code = main(["fit", "--input", str(data), "--t", "60", "--max-outer", "1", "--eta-tol", "1e-30",
                 "--strict", "--out", str(d / "strict.json")])
    assert code == EXIT_NONCONVERGED


def test_usage_and_data_errors(tmp_path, capsys):
    assert main([]) == EXIT_USAGE
    assert main(["fit", "--input", "x.csv"]) == EXIT_USAGE
    assert main(["fit", "--input", str(tmp_path / "missing.csv"), "--t", "5",
                 "--out", str(tmp_path / "o.json")]) == EXIT_DATA
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n3,oops\n")
    assert main(["fit", "--input", str(bad), "--t", "2", "--out", str(tmp_path / "o.json")]) == EXIT_DATA
    assert "row 3, column 2" in capsys.readouterr().err


def test_ingest(tmp_path):
    ev = tmp_path / "ev.csv"
    ev.write_text("team_id,match_id,minute,is_home,xg\nA,m1,1,1,0.4\nA,m2,1,0,0.1\n")
    out = tmp_path / "series.csv"
    assert main(["ingest", "--events", str(ev), "--team", "A", "--out", str(out)]) == EXIT_OK
    rows = out.read_text().splitlines()
    assert rows[0] == "xg" and len(rows) == 91 and float(rows[1]) == pytest.approx(0.3)
    assert main(["ingest", "--events", str(ev), "--team", "A", "--strict", "--out", str(out)]) == EXIT_DATA


def test_benchmark_subcommand(tmp_path):
    rows, summary = tmp_path / "rows.csv", tmp_path / "summary.csv"
    code = main(["benchmark", "--d", "3", "--T", "120", "--t", "40", "--seed-list", "1,2",
                 "--models", "linear,stationary", "--grid", "0.5", "--out", str(rows), "--summary", str(summary)])
    assert code == EXIT_OK
    assert len(rows.read_text().splitlines()) == 1 + 2 * 2 * 2
    assert "f1_median" in summary.read_text().splitlines()[0]
