"""
ANM causal discovery toolkit - command line front end.

    python app/app.py simulate --regime nonlinear_gauss --p 4 --n 100 --out sims/
    python app/app.py discover --data sims/data_000.csv --method resit --out g.txt
    python app/app.py evaluate --true sims/graph_000.txt --est g.txt --metrics shd,sid
    python app/app.py identifiability --spec triple.txt --out residuals.csv
    python app/app.py pairs --dir pairs/ --regression kernel --out curve.csv
    python app/app.py bench --config bench.txt

Machine-readable results go to files or stdout; logs go to stderr.
"""

import argparse
import dataclasses
import sys
from pathlib import Path
from typing import List, Optional

import pandas as pd

from components.benchmark import FAILURE_BUDGET, BenchConfig, run_benchmark
from components.discovery import DEFAULT_ALPHA, DEFAULT_LAMBDA, DISCOVERY_METHODS, BRUTE_FORCE_CAP, discover
from components.identifiability import condition1_residual, default_grid, make_grid, triple_from_keyvalue
from components.independence import INDEPENDENCE_MODES, HsicTest
from components.metrics import METRIC_COLUMNS, evaluate_estimate
from components.pairs import PAIR_N_CAP, load_pairs, rank_and_curve
from components.regression import REGRESSION_METHODS, KernelOptions, make_regression_method
from components.simulation import replicate_seed, simulate
from models.dataset import Dataset
from models.graphs import Dag
from models.sem import REGIMES, SimConfig, sem_to_keyvalue
from utils.config import get_float_list, get_int, read_keyvalue_file, write_keyvalue_file
from utils.error_handler import ToolkitError, configure_logging, error_handler
from utils.graph_io import read_graph, write_graph

EVALUATE_COLUMNS = ("method", "p", "n", "replicate", *METRIC_COLUMNS)


def parse_arguments(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(prog="anm-toolkit", description="Causal discovery with additive noise models")
    parser.add_argument("--log-level", default="INFO", help="Logging level on stderr")
    commands = parser.add_subparsers(dest="command", required=True)

    def command(name: str, help_text: str) -> argparse.ArgumentParser:
        sub = commands.add_parser(name, help=help_text, description=help_text)
        sub.add_argument("--seed", type=int, default=0, help="Random seed (default 0)")
        return sub

    sim = command("simulate", "Sample random DAGs and SEM data")
    sim.add_argument("--regime", choices=REGIMES, default="linear_nongauss")
    sim.add_argument("--p", type=int, required=True, help="Number of variables")
    sim.add_argument("--n", type=int, required=True, help="Number of samples")
    sim.add_argument("--replicates", type=int, default=1)
    sim.add_argument("--edge-prob", type=float, default=None, help="Override the 2/(p-1) edge probability")
    sim.add_argument("--noise-var-range", type=float, nargs=2, default=(0.1, 0.5), metavar=("LOW", "HIGH"))
    sim.add_argument("--joint", action="store_true", help="Joint instead of additive GP functions")
    sim.add_argument("--standardize-inputs", action="store_true", help="Standardize GP inputs")
    sim.add_argument("--out", required=True, help="Output directory")

    disc = command("discover", "Learn a DAG from a data CSV")
    disc.add_argument("--data", required=True, help="Dataset CSV with a header row")
    disc.add_argument("--method", choices=DISCOVERY_METHODS, default="resit")
    disc.add_argument("--regression", choices=REGRESSION_METHODS, default="linear")
    disc.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    disc.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    disc.add_argument("--independence", choices=INDEPENDENCE_MODES, default="joint")
    disc.add_argument("--max-nodes", type=int, default=BRUTE_FORCE_CAP, help="Brute-force node cap")
    disc.add_argument("--out", required=True, help="Graph text output")
    disc.add_argument("--diagnostics", default=None, help="Diagnostics side-file (default <out>.diag)")

    ev = command("evaluate", "Compare an estimated graph with the true DAG")
    ev.add_argument("--true", dest="true_graph", required=True, help="True DAG graph file")
    ev.add_argument("--est", required=True, help="Estimated DAG or CPDAG graph file")
    ev.add_argument("--metrics", default="shd,sid", help="Comma-separated subset of shd,sid")
    ev.add_argument("--method", default="", help="Method label for the output row")
    ev.add_argument("--n", type=int, default=None, help="Sample size label for the output row")
    ev.add_argument("--replicate", type=int, default=None, help="Replicate label for the output row")
    ev.add_argument("--out", default=None, help="CSV output (default stdout)")

    ident = command("identifiability", "Evaluate the identifiability residual on a grid")
    ident.add_argument("--spec", required=True, help="Triple spec file (key=value)")
    ident.add_argument("--grid-size", type=int, default=None, help="Points per axis (default 21)")
    ident.add_argument("--derivatives", choices=("analytic", "central-difference"), default=None)
    ident.add_argument("--out", required=True, help="Residual CSV output")

    pairs = command("pairs", "Rank cause-effect pairs and write the accuracy curve")
    pairs.add_argument("--dir", required=True, help="Directory with pairmeta.txt and pair files")
    pairs.add_argument("--regression", choices=REGRESSION_METHODS, default="kernel")
    pairs.add_argument("--n-cap", type=int, default=PAIR_N_CAP)
    pairs.add_argument("--workers", type=int, default=1)
    pairs.add_argument("--out", required=True, help="Curve CSV output")

    bench = command("bench", "Run the simulation benchmark")
    bench.add_argument("--config", required=True, help="Bench config file (key=value)")
    bench.add_argument("--out", default=None, help="Override the output directory")
    bench.add_argument("--workers", type=int, default=None, help="Override the worker count")
    bench.set_defaults(seed=None)

    return parser.parse_args(argv)


def run_simulate(args) -> int:
    out = Path(args.out)
    for r in range(args.replicates):
        config = SimConfig(
            p=args.p,
            n=args.n,
            regime=args.regime,
            seed=replicate_seed(args.seed, r),
            edge_prob=args.edge_prob,
            noise_variance_range=tuple(args.noise_var_range),
            additive=not args.joint,
            standardize_inputs=args.standardize_inputs,
        )
        g, data, spec = simulate(config)
        data.to_csv(out / f"data_{r:03d}.csv")
        write_graph(out / f"graph_{r:03d}.txt", g)
        write_keyvalue_file(out / f"sem_{r:03d}.txt", sem_to_keyvalue(spec))
        error_handler.log_info(f"replicate {r}: {g.edge_count} edges", "simulate")
    return 0


def run_discover(args) -> int:
    data = Dataset.from_csv(args.data)
    rm = make_regression_method(args.regression, KernelOptions(seed=args.seed))
    test = HsicTest(mode=args.independence)
    result = discover(data, args.method, rm, args.alpha, args.lam, args.seed, test, args.max_nodes)
    diagnostics = args.diagnostics or f"{args.out}.diag"
    result.write(args.out, diagnostics)
    error_handler.log_info(f"{result.graph.edge_count} edges written to {args.out}", args.method)
    return 0


def run_evaluate(args) -> int:
    truth = read_graph(args.true_graph)
    if not isinstance(truth, Dag):
        raise ToolkitError(f"{args.true_graph}: the true graph must be fully directed")
    estimate = read_graph(args.est)
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    row = {column: "" for column in EVALUATE_COLUMNS}
    row.update(method=args.method, p=truth.p,
               n="" if args.n is None else args.n,
               replicate="" if args.replicate is None else args.replicate)
    row.update(evaluate_estimate(truth, estimate, metrics))
    frame = pd.DataFrame([row], columns=list(EVALUATE_COLUMNS))
    frame.to_csv(args.out if args.out else sys.stdout, index=False)
    return 0


def run_identifiability(args) -> int:
    entries = read_keyvalue_file(args.spec)
    triple = triple_from_keyvalue(entries)
    if args.derivatives:
        triple = triple.with_mode(args.derivatives)
    size = args.grid_size or get_int(entries, "grid.size", 21)
    if "grid.x" in entries and "grid.y" in entries:
        grid = make_grid(get_float_list(entries, "grid.x", ()), get_float_list(entries, "grid.y", ()), size)
    else:
        grid = default_grid(triple, size)
    field = condition1_residual(triple, grid)
    frame = pd.DataFrame({
        "x": field.points[:, 0],
        "y": field.points[:, 1],
        "residual": field.residuals,
        "scale": field.scale,
        "admissible": field.admissible,
    })
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(args.out, index=False, float_format="%.17g")
    error_handler.log_info(
        f"max |r| = {field.max_abs():.3e} over {len(frame) - field.skipped} admissible points "
        f"({field.skipped} skipped)",
        "identifiability",
    )
    return 0


def run_pairs(args) -> int:
    records = load_pairs(args.dir)
    rm = make_regression_method(args.regression, KernelOptions(seed=args.seed))
    curve = rank_and_curve(records, rm, HsicTest(), args.n_cap, args.seed, args.workers)
    curve.to_csv(args.out)
    final = curve.points[-1]
    error_handler.log_info(f"accuracy {final.accuracy:.3f} at decision rate {final.decision_rate:.2f}", "pairs")
    return 0


def run_bench(args) -> int:
    config = BenchConfig.from_file(args.config)
    overrides = {}
    if args.out:
        overrides["output_dir"] = Path(args.out)
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.seed is not None:
        overrides["seed"] = args.seed
    config = dataclasses.replace(config, **overrides)
    outcome = run_benchmark(config)
    error_handler.log_info(f"summary written to {outcome.paths['summary']}", "bench")
    if not outcome.within_failure_budget:
        error_handler.log_error(
            f"{outcome.failure_rate:.1%} of method runs failed (budget {FAILURE_BUDGET:.0%})", "bench"
        )
        return 1
    return 0


COMMANDS = {
    "simulate": run_simulate,
    "discover": run_discover,
    "evaluate": run_evaluate,
    "identifiability": run_identifiability,
    "pairs": run_pairs,
    "bench": run_bench,
}


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = parse_arguments(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    configure_logging(args.log_level)
    try:
        return COMMANDS[args.command](args)
    except (ToolkitError, OSError, ValueError) as exc:
        error_handler.log_error(str(exc), args.command)
        return 1


if __name__ == "__main__":
    sys.exit(main())
