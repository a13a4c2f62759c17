"""
Desk-scale benchmark: simulate, discover and evaluate over a grid of
regimes, sizes and replicates, then aggregate mean and sd per cell.

Every replicate simulates one dataset shared by all methods. Seeds derive
from the base seed and the cell coordinates, so the tables do not depend on
the number of workers.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Tuple, Union

import pandas as pd

from components.discovery import (
    BRUTE_FORCE_CAP,
    DEFAULT_ALPHA,
    DEFAULT_LAMBDA,
    GraphScorer,
    brute_force,
    gds,
    resit,
)
from components.independence import INDEPENDENCE_MODES, HsicTest
from components.metrics import METRIC_COLUMNS, evaluate_estimate
from components.regression import KernelOptions, make_regression_method
from components.simulation import random_baseline_dag, replicate_seed, simulate
from models.graphs import ENUMERATION_CAP, Dag
from models.sem import REGIMES, SimConfig
from utils.config import get_float, get_int, get_int_list, get_list, get_str, read_keyvalue_file
from utils.error_handler import InvalidInputError, error_handler, get_logger, safe_execute
from utils.parallel import parallel_map

logger = get_logger(__name__)

BENCH_METHODS = ("resit", "gds", "brute_force", "random_baseline")
FAILURE_BUDGET = 0.05
LARGE_P = 10
ROW_COLUMNS = (
    "regime", "p", "n", "method", "replicate", *METRIC_COLUMNS,
    "score", "bf_le_gds", "gds_le_resit", "status", "error",
)
SUMMARY_COLUMNS = ("regime", "p", "n", "method", "metric", "mean", "sd", "replicates")
CONFIG_KEYS = (
    "regimes", "p", "n", "replicates", "replicates_large", "methods", "lambda", "alpha",
    "seed", "output", "regression", "independence", "workers", "brute_force_max_nodes",
)


@dataclass(frozen=True)
class BenchConfig:
    regimes: Tuple[str, ...] = REGIMES
    p_values: Tuple[int, ...] = (4,)
    n_values: Tuple[int, ...] = (100,)
    replicates: int = 100
    replicates_large: int = 20
    methods: Tuple[str, ...] = BENCH_METHODS
    lam: float = DEFAULT_LAMBDA
    alpha: float = DEFAULT_ALPHA
    seed: int = 0
    output_dir: Path = Path("bench_out")
    regression: str = "auto"
    independence: str = "joint"
    workers: int = 1
    brute_force_max_nodes: int = BRUTE_FORCE_CAP

    def __post_init__(self):
        problems = []
        if self.replicates < 1 or self.replicates_large < 1:
            problems.append("replicates must be >= 1")
        problems += [f"unknown regime {r!r}" for r in self.regimes if r not in REGIMES]
        problems += [f"unknown method {m!r}" for m in self.methods if m not in BENCH_METHODS]
        if self.regression not in ("auto", "linear", "kernel"):
            problems.append(f"unknown regression {self.regression!r}")
        if self.independence not in INDEPENDENCE_MODES:
            problems.append(f"unknown independence mode {self.independence!r}")
        if self.brute_force_max_nodes > ENUMERATION_CAP:
            problems.append(f"brute_force_max_nodes cannot exceed {ENUMERATION_CAP}")
        if "brute_force" in self.methods:
            too_big = [p for p in self.p_values if p > self.brute_force_max_nodes]
            if too_big:
                problems.append(f"brute_force requested for p={too_big} above cap {self.brute_force_max_nodes}")
        if any(p < 2 for p in self.p_values) or any(n < 20 for n in self.n_values):
            problems.append("benchmark cells need p >= 2 and n >= 20")
        if problems:
            raise InvalidInputError("invalid bench config: " + "; ".join(problems))

    def replicates_for(self, p: int) -> int:
        return self.replicates_large if p >= LARGE_P else self.replicates

    def regression_for(self, regime: str) -> str:
        if self.regression != "auto":
            return self.regression
        return "linear" if regime == "linear_nongauss" else "kernel"

    @classmethod
    def from_keyvalue(cls, entries: Mapping[str, str]) -> "BenchConfig":
        unknown = sorted(set(entries) - set(CONFIG_KEYS))
        if unknown:
            raise InvalidInputError(f"unknown bench config keys {unknown}")
        defaults = cls.__dataclass_fields__
        return cls(
            regimes=tuple(get_list(entries, "regimes", REGIMES)),
            p_values=get_int_list(entries, "p", defaults["p_values"].default),
            n_values=get_int_list(entries, "n", defaults["n_values"].default),
            replicates=get_int(entries, "replicates", defaults["replicates"].default),
            replicates_large=get_int(entries, "replicates_large", defaults["replicates_large"].default),
            methods=tuple(get_list(entries, "methods", BENCH_METHODS)),
            lam=get_float(entries, "lambda", DEFAULT_LAMBDA),
            alpha=get_float(entries, "alpha", DEFAULT_ALPHA),
            seed=get_int(entries, "seed", 0),
            output_dir=Path(get_str(entries, "output", "bench_out")),
            regression=get_str(entries, "regression", "auto"),
            independence=get_str(entries, "independence", "joint"),
            workers=get_int(entries, "workers", 1),
            brute_force_max_nodes=get_int(entries, "brute_force_max_nodes", BRUTE_FORCE_CAP),
        )

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "BenchConfig":
        return cls.from_keyvalue(read_keyvalue_file(path))


@dataclass(frozen=True)
class ReplicateTask:
    config: BenchConfig
    regime: str
    p: int
    n: int
    replicate: int
    seed: int


@dataclass(frozen=True, eq=False)
class BenchOutcome:
    rows: pd.DataFrame
    summary: pd.DataFrame
    failure_rate: float
    paths: Dict[str, Path] = field(default_factory=dict)

    @property
    def within_failure_budget(self) -> bool:
        return self.failure_rate <= FAILURE_BUDGET


def _describe(exc: Exception) -> str:
    return f"{type(exc).__name__}: {exc}"


@safe_execute("bench simulate", on_failure=_describe)
def _simulate(task: ReplicateTask):
    return simulate(SimConfig(task.p, task.n, task.regime, task.seed))


@safe_execute("bench score", on_failure=_describe)
def _score(scorer: GraphScorer, graph: Dag) -> float:
    return scorer(graph).total


@safe_execute("bench evaluate", on_failure=_describe)
def _evaluate(g_true: Dag, estimate: Dag) -> Dict[str, float]:
    return evaluate_estimate(g_true, estimate)


@safe_execute("bench method", on_failure=_describe)
def _estimate(method: str, task: ReplicateTask, data, rm, test) -> Dag:
    cfg = task.config
    if method == "random_baseline":
        return random_baseline_dag(task.p, replicate_seed(task.seed, 99))
    if method == "resit":
        return resit(data, rm, cfg.alpha, test).graph
    if method == "gds":
        return gds(data, rm, cfg.lam, replicate_seed(task.seed, 7), test).graph
    return brute_force(data, rm, cfg.lam, test, cfg.brute_force_max_nodes).graph


def _base_row(task: ReplicateTask, method: str) -> Dict[str, object]:
    row: Dict[str, object] = {column: math.nan for column in ROW_COLUMNS}
    row.update(regime=task.regime, p=task.p, n=task.n, method=method, replicate=task.replicate,
               status="ok", error="")
    return row


def run_replicate(task: ReplicateTask) -> List[Dict[str, object]]:
    """Metric rows of every configured method on one simulated dataset"""
    cfg = task.config
    simulated = _simulate(task)
    if isinstance(simulated, str):
        return [dict(_base_row(task, m), status="failed", error=simulated) for m in cfg.methods]
    g_true, data, _ = simulated

    rm = make_regression_method(cfg.regression_for(task.regime), KernelOptions(seed=task.seed % 2 ** 32))
    test = HsicTest(mode=cfg.independence)
    scorer = GraphScorer(data, rm, cfg.lam, test)
    rows, scores = [], {}
    for method in cfg.methods:
        row = _base_row(task, method)
        rows.append(row)
        estimate = _estimate(method, task, data, rm, test)
        if isinstance(estimate, str):
            row.update(status="failed", error=estimate)
            continue
        metrics = _evaluate(g_true, estimate)
        if isinstance(metrics, str):
            row.update(status="failed", error=metrics)
            continue
        row.update(metrics)
        if method != "random_baseline":
            total = _score(scorer, estimate)
            if not isinstance(total, str):
                scores[method] = row["score"] = total

    bf_le_gds = scores["brute_force"] <= scores["gds"] + 1e-9 if {"brute_force", "gds"} <= set(scores) else None
    gds_le_resit = scores["gds"] <= scores["resit"] + 1e-9 if {"gds", "resit"} <= set(scores) else None
    if bf_le_gds is False:
        error_handler.log_error("brute force scored worse than greedy search", f"replicate seed {task.seed}")
    for row in rows:
        row["bf_le_gds"] = "" if bf_le_gds is None else str(bf_le_gds).lower()
        row["gds_le_resit"] = "" if gds_le_resit is None else str(gds_le_resit).lower()
    return rows


def summarize(rows: pd.DataFrame) -> pd.DataFrame:
    """Mean, sd and replicate count per (regime, p, n, method, metric) over successful rows"""
    ok = rows[rows["status"] == "ok"]
    long = ok.melt(
        id_vars=["regime", "p", "n", "method"],
        value_vars=list(METRIC_COLUMNS),
        var_name="metric",
        value_name="value",
    )
    summary = (
        long.groupby(["regime", "p", "n", "method", "metric"], sort=True)["value"]
        .agg(mean="mean", sd="std", replicates="count")
        .reset_index()
    )
    return summary[list(SUMMARY_COLUMNS)]


def build_tasks(cfg: BenchConfig) -> List[ReplicateTask]:
    tasks = []
    for r, regime in enumerate(cfg.regimes):
        for p in cfg.p_values:
            for n in cfg.n_values:
                for rep in range(cfg.replicates_for(p)):
                    seed = replicate_seed(cfg.seed, r, p, n, rep)
                    tasks.append(ReplicateTask(cfg, regime, p, n, rep, seed))
    return tasks


def run_benchmark(cfg: BenchConfig, write: bool = True) -> BenchOutcome:
    tasks = build_tasks(cfg)
    logger.info("bench: %d replicates x %d methods on %d worker(s)", len(tasks), len(cfg.methods), cfg.workers)
    results = parallel_map(run_replicate, tasks, workers=cfg.workers, description="bench")
    rows = pd.DataFrame([row for replicate in results for row in replicate], columns=list(ROW_COLUMNS))
    summary = summarize(rows)
    failed = int((rows["status"] == "failed").sum())
    failure_rate = failed / len(rows) if len(rows) else 0.0
    if failed:
        logger.warning("bench: %d of %d method runs failed (%.1f%%)", failed, len(rows), 100 * failure_rate)

    paths: Dict[str, Path] = {}
    if write:
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
        paths["metrics"] = cfg.output_dir / "metrics.csv"
        paths["summary"] = cfg.output_dir / "summary.csv"
        rows.to_csv(paths["metrics"], index=False, float_format="%.17g")
        summary.to_csv(paths["summary"], index=False, float_format="%.17g")
    return BenchOutcome(rows, summary, failure_rate, paths)
