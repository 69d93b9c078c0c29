import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from metricda.cli import CSV_SCHEMA, main, read_csv, write_csv
from metricda.experiments import BenchConfig, config_defaults


def _run(tmp_path, *argv, name="out"):
    out = tmp_path / name
    code = main([*argv, "--out", str(out)])
    return code, out


def test_bench_ten_rounds_gives_ten_rows(tmp_path):
    code, out = _run(tmp_path, "bench", "--T", "10", "--reps", "1")
    assert code == 0
    series = sorted(out.glob("series_*.csv"))
    assert series
    for path in series:
        lines = path.read_text().splitlines()
        assert lines[0] == f"# {CSV_SCHEMA}"
        assert lines[1] == "t,mean,q10,q90,bound"
        assert len(lines) - 2 == 10
        np.testing.assert_array_equal(read_csv(path)["t"], np.arange(1, 11))


def test_bench_output_independent_of_threads(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"stream": "altaffine:L=5", "algorithms": ["greedy", "da:exp", "da:rho:1.5"],
                               "T": 200, "reps": 6, "chunk": 2, "seed": 11}))
    _, a = _run(tmp_path, "bench", "--config", str(cfg), "--threads", "1", name="a")
    _, b = _run(tmp_path, "bench", "--config", str(cfg), "--threads", "3", name="b")
    files = sorted(p.name for p in a.iterdir())
    assert files == sorted(p.name for p in b.iterdir())
    for f in files:
        assert (a / f).read_bytes() == (b / f).read_bytes(), f


def test_threads_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("CR_THREADS", "2")
    code, out = _run(tmp_path, "lowerbound", "--T", "20", "--reps", "8")
    assert code == 0
    monkeypatch.setenv("CR_THREADS", "zero")
    code, _ = _run(tmp_path, "lowerbound", "--T", "20", "--reps", "8", name="bad")
    assert code == 2


def test_manifest_echoes_config(tmp_path):
    code, out = _run(tmp_path, "bench", "--T", "12", "--reps", "2", "--seed", "7")
    assert code == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["command"] == "bench" and man["csv_schema"] == CSV_SCHEMA
    cfg = man["config"]
    assert (cfg["T"], cfg["reps"], cfg["seed"]) == (12, 2, 7)
    assert set(cfg) == set(config_defaults()["bench"])
    # rerunning from the manifest config reproduces the outputs
    again = tmp_path / "again.json"
    again.write_text(json.dumps(cfg))
    _, out2 = _run(tmp_path, "bench", "--config", str(again), name="out2")
    for p in out.glob("*.csv"):
        assert p.read_bytes() == (out2 / p.name).read_bytes()


@pytest.mark.parametrize(
    "payload, field",
    [
        ({"T": 0}, "bench.T"),
        ({"reps": "many"}, "bench.reps"),
        ({"stream": "noise"}, "bench.stream"),
        ({"algorithms": ["ogd", "newton"]}, "bench.algorithms[1]"),
        ({"algorithms": ["gp"], "stream": "rademacher:domain=lshape"}, "bench.algorithms[0]"),
        ({"fit_window": [100, 10]}, "bench.fit_window"),
        ({"regret": "mean"}, "bench.regret"),
        ({"colour": 1}, "bench.colour"),
        ({"seed": -1}, "bench.seed"),
    ],
)
def test_config_errors_name_the_field(tmp_path, capsys, payload, field):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(payload))
    code, out = _run(tmp_path, "bench", "--config", str(cfg))
    assert code == 2
    err = capsys.readouterr().err
    assert f"{field}:" in err
    assert not out.exists()


def test_config_file_errors(tmp_path, capsys):
    assert main(["game", "--config", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["game", "--config", str(bad)]) == 2
    bad.write_text("[1, 2]")
    assert main(["game", "--config", str(bad)]) == 2
    bad.write_text(json.dumps({"game": "g9"}))
    assert main(["game", "--config", str(bad)]) == 2
    assert "game.game" in capsys.readouterr().err


@pytest.mark.parametrize("cmd", ["bench", "game", "lowerbound", "selfcheck"])
def test_print_defaults(cmd, capsys):
    assert main([cmd, "--print-defaults"]) == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed == config_defaults()[cmd]


def test_defaults_validate():
    for cls_name, data in config_defaults().items():
        from metricda import cli

        cli.COMMANDS[cls_name](**data).validate(cls_name)
    assert BenchConfig().m == 64


@settings(max_examples=50, deadline=None)
@given(
    xs=st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=20),
    ks=st.integers(0, 2**62),
)
def test_csv_round_trip_is_exact(tmp_path_factory, xs, ks):
    path = tmp_path_factory.mktemp("csv") / "x.csv"
    n = len(xs)
    write_csv(path, ["t", "x"], [np.arange(n) + ks, np.array(xs)])
    back = read_csv(path)
    np.testing.assert_array_equal(back["x"], np.array(xs))
    # 17 significant digits round-trip every double
    write_csv(path.with_suffix(".b"), ["t", "x"], [np.arange(n) + ks, back["x"]])
    assert path.read_text() == path.with_suffix(".b").read_text()


def test_read_csv_rejects_unversioned(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("t,x\n1,2\n")
    with pytest.raises(ValueError):
        read_csv(p)


def test_game_outputs(tmp_path):
    cfg = tmp_path / "g.json"
    cfg.write_text(json.dumps({"game": "g2", "T": 100, "reps": 2, "hist_at": [1, 10, 100]}))
    code, out = _run(tmp_path, "game", "--config", str(cfg))
    assert code == 0
    names = {p.name for p in out.iterdir()}
    assert {"manifest.json", "summary.json", "series_payoff.csv", "alpha_trace.csv",
            "series_regret_1.csv", "series_regret_2.csv", "cdf_1.csv", "cdf_2.csv"} <= names
    for p in (1, 2):
        for t in (1, 10, 100):
            h = read_csv(out / f"hist_{p}_{t}.csv")
            area = np.sum(h["density"] * (h["bin_right"] - h["bin_left"]))
            assert area == pytest.approx(1.0)
    summary = json.loads((out / "summary.json").read_text())
    for p in (1, 2):
        assert {"1", "10", "100"} <= set(summary[f"regret{p}_at"])


def test_lowerbound_outputs(tmp_path):
    code, out = _run(tmp_path, "lowerbound", "--T", "50", "--reps", "40")
    assert code == 0
    s = read_csv(out / "series_lowerbound.csv")
    assert s["t"][-1] == 50
    assert set(np.unique(s["dominates"])) <= {0.0, 1.0}
    summary = json.loads((out / "summary.json").read_text())
    assert isinstance(summary, dict)


def test_selfcheck_quick_passes(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "metricda", "selfcheck", "--quick", "--out", str(tmp_path / "sc")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    lines = [json.loads(x) for x in proc.stdout.splitlines()]
    assert lines and all(r["passed"] for r in lines)
    report = json.loads((tmp_path / "sc" / "report.json").read_text())
    assert len(report) == len(lines)
