"""End-to-end tests of the command line front end."""

import numpy as np
import pandas as pd
import pytest

import app
from app import EVALUATE_COLUMNS, main
from components.benchmark import BenchOutcome
from models.graphs import Dag
from utils.config import read_keyvalue_file
from utils.graph_io import read_graph, write_graph

QUIET = ["--log-level", "WARNING"]


def test_help_exits_cleanly(capsys):
    assert main(["--help"]) == 0
    assert "simulate" in capsys.readouterr().out


def test_unknown_flag_is_a_usage_error():
    assert main(["discover", "--data", "x.csv", "--out", "g.txt", "--bogus"]) == 2
    assert main([]) == 2


def test_simulate_discover_evaluate_pipeline(tmp_path, capsys):
    sims = tmp_path / "sims"
    assert main(QUIET + ["simulate", "--p", "3", "--n", "60", "--replicates", "2", "--out", str(sims), "--seed", "4"]) == 0
    for r in range(2):
        assert (sims / f"data_{r:03d}.csv").exists()
        assert read_keyvalue_file(sims / f"sem_{r:03d}.txt")["regime"] == "linear_nongauss"
    truth = read_graph(sims / "graph_000.txt")
    assert isinstance(truth, Dag) and truth.p == 3

    estimate = tmp_path / "g.txt"
    assert main(QUIET + ["discover", "--data", str(sims / "data_000.csv"), "--method", "gds", "--out", str(estimate)]) == 0
    assert read_graph(estimate).p == 3
    assert read_keyvalue_file(f"{estimate}.diag")["method"] == "gds"

    capsys.readouterr()
    assert main(QUIET + ["evaluate", "--true", str(sims / "graph_000.txt"), "--est", str(estimate),
                         "--method", "gds", "--n", "60", "--replicate", "0"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == ",".join(EVALUATE_COLUMNS)
    assert lines[1].startswith("gds,3,60,0,")


def test_evaluate_writes_file(tmp_path):
    truth = write_graph(tmp_path / "true.txt", Dag(3, frozenset({(0, 1), (1, 2)})))
    out = tmp_path / "row.csv"
    assert main(QUIET + ["evaluate", "--true", str(truth), "--est", str(truth), "--metrics", "shd", "--out", str(out)]) == 0
    row = pd.read_csv(out).iloc[0]
    assert row["shd_dag"] == 0 and row["shd_cpdag"] == 0
    assert np.isnan(row["sid_lower"])


def test_discover_reports_missing_file(tmp_path):
    assert main(QUIET + ["discover", "--data", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "g.txt")]) == 1


def test_evaluate_rejects_mismatched_sizes(tmp_path):
    a = write_graph(tmp_path / "a.txt", Dag.empty(2))
    b = write_graph(tmp_path / "b.txt", Dag.empty(3))
    assert main(QUIET + ["evaluate", "--true", str(a), "--est", str(b)]) == 1


def test_identifiability_command(tmp_path):
    spec = tmp_path / "triple.txt"
    spec.write_text(
        "f=polynomial\nf.coefficients=0,0,0,1\nxi=gaussian\nnu=gaussian\n"
        "grid.x=-2,2\ngrid.y=-2,2\n"
    )
    out = tmp_path / "residuals.csv"
    assert main(QUIET + ["identifiability", "--spec", str(spec), "--grid-size", "11", "--out", str(out)]) == 0
    frame = pd.read_csv(out)
    assert list(frame.columns) == ["x", "y", "residual", "scale", "admissible"]
    assert len(frame) == 121
    assert (~frame["admissible"]).sum() >= 1
    assert frame.loc[frame["admissible"], "residual"].abs().max() > 100.0


def test_identifiability_command_rejects_bad_spec(tmp_path):
    spec = tmp_path / "triple.txt"
    spec.write_text("xi=laplace\n")
    assert main(QUIET + ["identifiability", "--spec", str(spec), "--out", str(tmp_path / "r.csv")]) == 1


def test_pairs_command(tmp_path, pair_directory):
    out = tmp_path / "curve.csv"
    assert main(QUIET + ["pairs", "--dir", str(pair_directory), "--regression", "linear", "--out", str(out)]) == 0
    curve = pd.read_csv(out)
    assert curve["decision_rate"].iloc[-1] == pytest.approx(1.0)


def test_bench_command(tmp_path):
    config = tmp_path / "bench.txt"
    config.write_text("regimes=linear_nongauss\np=3\nn=30\nreplicates=1\nmethods=resit,random_baseline\n")
    out = tmp_path / "bench_out"
    assert main(QUIET + ["bench", "--config", str(config), "--out", str(out)]) == 0
    metrics = pd.read_csv(out / "metrics.csv")
    assert sorted(metrics["method"]) == ["random_baseline", "resit"]
    assert (out / "summary.csv").exists()


def test_bench_command_rejects_unknown_keys(tmp_path):
    config = tmp_path / "bench.txt"
    config.write_text("colour=blue\n")
    assert main(QUIET + ["bench", "--config", str(config)]) == 1


@pytest.mark.parametrize("flags, expected", [([], 5), (["--seed", "0"], 0), (["--seed", "3"], 3)])
def test_bench_seed_flag_overrides_config(tmp_path, monkeypatch, flags, expected):
    config = tmp_path / "bench.txt"
    config.write_text("regimes=linear_nongauss\np=3\nn=30\nreplicates=1\nseed=5\n")
    received = []

    def fake_run(cfg):
        received.append(cfg)
        return BenchOutcome(pd.DataFrame(), pd.DataFrame(), 0.0, {"summary": tmp_path / "summary.csv"})

    monkeypatch.setattr(app, "run_benchmark", fake_run)
    assert main(QUIET + ["bench", "--config", str(config)] + flags) == 0
    assert received[0].seed == expected
