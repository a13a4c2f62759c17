"""Tests for the benchmark config, replicate runner and summary tables."""

from pathlib import Path

import pandas as pd
import pytest

import components.benchmark as benchmark
from components.benchmark import (
    BENCH_METHODS,
    ROW_COLUMNS,
    SUMMARY_COLUMNS,
    BenchConfig,
    build_tasks,
    run_benchmark,
)
from components.metrics import METRIC_COLUMNS, evaluate_estimate
from utils.error_handler import InvalidInputError, StructuralError


def _small_config(tmp_path, **overrides):
    settings = dict(regimes=("linear_nongauss",), p_values=(3,), n_values=(40,), replicates=2,
                    output_dir=tmp_path / "bench")
    settings.update(overrides)
    return BenchConfig(**settings)


def test_config_from_keyvalue(tmp_path):
    cfg = BenchConfig.from_keyvalue({
        "regimes": "linear_nongauss",
        "p": "3,4",
        "n": "50",
        "replicates": "5",
        "methods": "resit,gds",
        "lambda": "0.5",
        "output": str(tmp_path / "out"),
    })
    assert cfg.p_values == (3, 4) and cfg.n_values == (50,)
    assert cfg.methods == ("resit", "gds") and cfg.lam == 0.5
    assert cfg.output_dir == tmp_path / "out"
    assert cfg.regression_for("linear_nongauss") == "linear"
    assert cfg.regression_for("nonlinear_gauss") == "kernel"
    assert cfg.replicates_for(10) == cfg.replicates_large


def test_config_from_file(tmp_path):
    path = tmp_path / "bench.txt"
    path.write_text("# smoke\nregimes=nonlinear_gauss\np=2\nn=30\nreplicates=1\nregression=linear\n")
    cfg = BenchConfig.from_file(path)
    assert cfg.regimes == ("nonlinear_gauss",) and cfg.regression_for("nonlinear_gauss") == "linear"


@pytest.mark.parametrize("entries", [
    {"p": "4", "colour": "blue"},
    {"p": "6", "methods": "brute_force"},
    {"n": "10"},
    {"regimes": "binary"},
    {"methods": "pc"},
    {"independence": "conditional"},
])
def test_config_rejects_bad_entries(entries):
    with pytest.raises(InvalidInputError):
        BenchConfig.from_keyvalue(entries)


def test_tasks_have_distinct_seeds(tmp_path):
    tasks = build_tasks(_small_config(tmp_path, p_values=(3, 4), replicates=3))
    assert len(tasks) == 6
    assert len({task.seed for task in tasks}) == 6


def test_run_benchmark_smoke(tmp_path):
    outcome = run_benchmark(_small_config(tmp_path))
    rows = outcome.rows
    assert list(rows.columns) == list(ROW_COLUMNS)
    assert len(rows) == 8
    assert set(rows["method"]) == {"resit", "gds", "brute_force", "random_baseline"}
    assert (rows["status"] == "ok").all() and outcome.failure_rate == 0.0
    assert set(rows["bf_le_gds"]) == {"true"}
    assert rows.loc[rows["method"] == "random_baseline", "score"].isna().all()

    summary = outcome.summary
    assert list(summary.columns) == list(SUMMARY_COLUMNS)
    assert len(summary) == 4 * len(METRIC_COLUMNS)
    assert (summary["replicates"] == 2).all()

    written = pd.read_csv(outcome.paths["metrics"])
    assert len(written) == 8
    assert outcome.paths["summary"].exists()


def test_run_benchmark_is_reproducible(tmp_path):
    cfg = _small_config(tmp_path, methods=("resit", "random_baseline"))
    first = run_benchmark(cfg, write=False)
    second = run_benchmark(cfg, write=False)
    pd.testing.assert_frame_equal(first.rows, second.rows)
    assert first.paths == {}


def test_failed_method_becomes_failed_row(tmp_path, monkeypatch):
    def broken(*args, **kwargs):
        raise RuntimeError("did not converge")

    monkeypatch.setattr(benchmark, "resit", broken)
    outcome = run_benchmark(_small_config(tmp_path, methods=("resit", "gds")), write=False)
    failed = outcome.rows[outcome.rows["method"] == "resit"]
    assert (failed["status"] == "failed").all()
    assert failed["error"].str.contains("did not converge").all()
    assert outcome.failure_rate == 0.5
    assert not outcome.within_failure_budget
    assert set(outcome.summary["method"]) == {"gds"}


def test_failed_evaluation_becomes_failed_row(tmp_path, monkeypatch):
    calls = []

    def flaky(g_true, estimate):
        calls.append(estimate)
        if len(calls) == 1:
            raise StructuralError("estimate has the wrong size")
        return evaluate_estimate(g_true, estimate)

    monkeypatch.setattr(benchmark, "evaluate_estimate", flaky)
    outcome = run_benchmark(_small_config(tmp_path, methods=("resit", "random_baseline")), write=False)
    rows = outcome.rows
    assert len(rows) == 4 and len(calls) == 4
    failed = rows[rows["status"] == "failed"]
    assert len(failed) == 1
    assert failed["error"].str.contains("wrong size").all()
    assert failed["score"].isna().all()
    assert outcome.failure_rate == 0.25
    assert (rows.loc[rows["status"] == "ok", "shd_dag"] >= 0).all()


def _desk_means(tmp_path, regime, n=100, methods=BENCH_METHODS, replicates=100):
    cfg = BenchConfig(regimes=(regime,), p_values=(4,), n_values=(n,), replicates=replicates,
                      methods=methods, output_dir=tmp_path / "bench")
    outcome = run_benchmark(cfg, write=False)
    assert outcome.within_failure_budget
    means = outcome.summary[outcome.summary["metric"] == "shd_dag"].set_index("method")["mean"]
    return outcome, means


@pytest.mark.slow
@pytest.mark.parametrize("regime, bounds", [
    ("linear_nongauss", {"brute_force": 1.2, "gds": 1.4, "resit": 2.0}),
    ("nonlinear_gauss", {"brute_force": 2.0, "resit": 2.6}),
])
def test_desk_scale_mean_shd(tmp_path, regime, bounds):
    outcome, means = _desk_means(tmp_path, regime)
    for method, bound in bounds.items():
        assert means[method] <= bound, method
    for method in ("resit", "gds", "brute_force"):
        assert means[method] < means["random_baseline"]
    assert 3.0 <= means["random_baseline"] <= 6.0

    per_replicate = outcome.rows[outcome.rows["method"] == "gds"]
    assert (per_replicate["bf_le_gds"] == "true").mean() >= 0.95
    assert (per_replicate["gds_le_resit"] == "true").mean() >= 0.8


@pytest.mark.slow
def test_resit_nonlinear_gaussian_large_sample(tmp_path):
    _, means = _desk_means(tmp_path, "nonlinear_gauss", n=500, methods=("resit",))
    assert means["resit"] <= 1.5


def test_shipped_desk_config_is_valid():
    path = Path(__file__).resolve().parents[1] / "scripts" / "desk_bench.txt"
    cfg = BenchConfig.from_file(path)
    assert cfg.p_values == (4,) and cfg.n_values == (100,) and cfg.replicates == 100
    assert set(cfg.methods) == {"resit", "gds", "brute_force", "random_baseline"}
