import csv
import io
import json

import pytest

from cocoa_abm.cli import (UsageError, main, parse_band, parse_percent_list, parse_progression,
                           parse_seeds)
from cocoa_abm.domain import config_to_dict
from conftest import small_config


def test_progression():
    assert parse_progression("0,20,...,100") == [0, 20, 40, 60, 80, 100]
    assert parse_progression("1, 2.5") == [1.0, 2.5]
    for bad in ("", "0,...,10", "0,20,...,90", "10,0,...,20", "a,b"):
        with pytest.raises(UsageError):
            parse_progression(bad)


def test_percent_lists_and_seeds():
    assert parse_percent_list("0,20,...,100") == (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
    with pytest.raises(UsageError):
        parse_percent_list("50,150")
    assert parse_seeds("1..30") == tuple(range(1, 31))
    assert parse_seeds("3,5") == (3, 5)
    with pytest.raises(UsageError):
        parse_seeds("5..1")
    assert parse_band("5,10") == (0.05, 0.10)


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(config_to_dict(small_config(max_days=6))))
    return path


def test_simulate_stdout(cfg_file, capsys):
    assert main(["simulate", "--config", str(cfg_file), "--seed", "2", "--p1", "50"]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert len(rows) == 7 and rows[1][:5] == ["2", "0.5", "0", "0", "1"]


def test_simulate_files(cfg_file, tmp_path):
    out, ev = tmp_path / "run.csv", tmp_path / "ev.csv"
    assert main(["simulate", "--config", str(cfg_file), "--p1", "100", "--out", str(out),
                 "--events", str(ev)]) == 0
    assert out.read_text().count("\n") == 7 and ev.exists()


def test_bad_output_path_one_line_diagnostic(cfg_file, tmp_path, capsys):
    code = main(["simulate", "--config", str(cfg_file), "--out", str(tmp_path / "no" / "x.csv")])
    err = capsys.readouterr().err
    assert code != 0 and err.count("\n") == 1 and err.startswith("cocoa-abm simulate: error:")


def test_bad_config(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"beta": "lots"}')
    assert main(["simulate", "--config", str(bad)]) == 2
    assert "error" in capsys.readouterr().err


def test_pipeline(cfg_file, tmp_path, capsys):
    store = tmp_path / "store"
    grid = ["--grid-p1", "0,100", "--grid-p2", "0,60", "--grid-p3", "0,100"]
    assert main(["sweep", "--config", str(cfg_file), *grid, "--seeds", "1..3",
                 "--parallelism", "1", "--out", str(store)]) == 0
    assert "executed 24 runs" in capsys.readouterr().out
    assert main(["sweep", "--config", str(cfg_file), *grid, "--seeds", "1..3",
                 "--parallelism", "1", "--out", str(store)]) == 0
    assert "executed 0 runs, skipped 24" in capsys.readouterr().out
    assert main(["analyze", str(store)]) == 0
    names = sorted(p.name for p in store.iterdir() if p.is_file())
    assert names == ["heatmap_p3-0.csv", "heatmap_p3-1.csv", "manifest.json", "summary.csv",
                     "w.csv"]
    assert main(["render", str(store), "--out", str(tmp_path / "fig")]) == 0
    assert len(list((tmp_path / "fig").glob("*.svg"))) == 4


def test_analyze_incomplete_store(cfg_file, tmp_path, capsys):
    store = tmp_path / "s"
    assert main(["sweep", "--config", str(cfg_file), "--grid-p1", "0,100", "--grid-p2", "0",
                 "--grid-p3", "0", "--seeds", "1,2", "--parallelism", "1",
                 "--out", str(store)]) == 0
    (store / "runs" / "p1-1_p2-0_p3-0.csv").unlink()
    capsys.readouterr()
    assert main(["analyze", str(store)]) == 2
    err = capsys.readouterr().err
    assert "2 runs missing" in err and "(1,0,0) seed 1" in err and "(1,0,0) seed 2" in err


def test_threads_env_used(cfg_file, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("COCOA_ABM_THREADS", "nope")
    code = main(["sweep", "--config", str(cfg_file), "--grid-p1", "0", "--grid-p2", "0",
                 "--grid-p3", "0", "--seeds", "1", "--out", str(tmp_path / "t")])
    assert code == 2 and "COCOA_ABM_THREADS" in capsys.readouterr().err


def test_calibrate(cfg_file, tmp_path, capsys):
    out = tmp_path / "cal.json"
    code = main(["calibrate", "--config", str(cfg_file), "--seeds", "1..3", "--band", "0,100",
                 "--range", "0.5,1", "--parallelism", "1", "--out", str(out)])
    assert code == 0 and json.loads(out.read_text())["beta"] == 0.5
    assert "beta = 0.005" in capsys.readouterr().out
