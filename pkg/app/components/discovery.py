"""
Structure learners for additive noise models.

  * ``resit``: regression with subsequent independence test. Sinks are
    peeled off one at a time, then superfluous parents are pruned.
  * ``score_graph`` / ``brute_force`` / ``gds``: a penalized independence
    score (sum of per-node dependence measures plus lambda per edge)
    minimized exhaustively or by greedy search with one-step look-ahead.
  * ``infer_direction``: the bivariate two-model comparison.

Regression methods and independence tests are injected callables, so any
of them can be swapped (the test suite injects an exact oracle).
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from components.independence import HsicTest, IndependenceTest
from components.regression import RegressionMethod
from models.dataset import Dataset
from models.graphs import Dag, EdgeMove, TopologicalOrder, count_dags, enumerate_dags, neighbor_moves
from utils.config import write_keyvalue_file
from utils.error_handler import InvalidInputError, RefusalError, RegressionFailure, get_logger
from utils.graph_io import write_graph

logger = get_logger(__name__)

DEFAULT_ALPHA = 0.05
# log10(0.05) - log10(0.01): one edge must buy a p-value gain from 0.01 to 0.05
DEFAULT_LAMBDA = math.log10(0.05) - math.log10(0.01)
BRUTE_FORCE_CAP = 4
MIN_ROWS = 20
DISCOVERY_METHODS = ("resit", "gds", "brute_force")
DECISIONS = ("x_causes_y", "y_causes_x", "undecided")


@dataclass(frozen=True)
class ScoreReport:
    graph: Dag
    per_node_dm: Tuple[float, ...]
    edge_count: int
    lam: float
    total: float


@dataclass(frozen=True, eq=False)
class DiscoveryResult:
    graph: Dag
    order: Optional[TopologicalOrder] = None
    score: Optional[ScoreReport] = None
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def diagnostics_entries(self) -> Dict[str, object]:
        entries: Dict[str, object] = dict(self.diagnostics)
        entries["edges"] = self.graph.edge_count
        if self.order is not None:
            entries["order"] = list(self.order.pi)
        if self.score is not None:
            entries["score.total"] = self.score.total
            entries["score.lambda"] = self.score.lam
            entries["score.per_node_dm"] = list(self.score.per_node_dm)
        return entries

    def write(self, graph_path: Union[str, Path], diagnostics_path: Optional[Union[str, Path]] = None):
        write_graph(graph_path, self.graph)
        if diagnostics_path is not None:
            write_keyvalue_file(diagnostics_path, self.diagnostics_entries())


@dataclass(frozen=True)
class DirectionVerdict:
    p_forward: float
    p_backward: float
    decision: str
    rank_key: float
    log10_forward: float = 0.0
    log10_backward: float = 0.0
    degenerate: bool = False


class ResidualCache:
    """In-sample residuals of one dataset keyed by (response, parent set)"""

    def __init__(self, data: Dataset, rm: RegressionMethod):
        self.data = data
        self.rm = rm
        self._residuals: Dict[Tuple[int, Tuple[int, ...]], np.ndarray] = {}

    @property
    def fits(self) -> int:
        return len(self._residuals)

    def residuals(self, response: int, predictors: Sequence[int]) -> np.ndarray:
        key = (int(response), tuple(sorted(int(j) for j in predictors)))
        if key not in self._residuals:
            try:
                fit = self.rm(self.data, *key)
            except RegressionFailure:
                raise
            except Exception as exc:
                raise RegressionFailure(key[0], key[1], exc) from exc
            self._residuals[key] = fit.residuals
        return self._residuals[key]


def score_graph(
    data: Dataset,
    g: Dag,
    rm: RegressionMethod,
    lam: float = DEFAULT_LAMBDA,
    test: Optional[IndependenceTest] = None,
    cache: Optional[ResidualCache] = None,
) -> ScoreReport:
    """
    Sum over nodes of DM(res_i, res_-i) plus lam * #edges, where res_i are the
    residuals of node i regressed on its parents in ``g``.
    """
    if g.p != data.p:
        raise InvalidInputError(f"graph has p={g.p} but data has p={data.p}")
    test = test or HsicTest()
    cache = cache or ResidualCache(data, rm)
    residuals = np.column_stack([cache.residuals(j, g.parents(j)) for j in range(g.p)])
    if g.p == 1:
        per_node = (0.0,)
    else:
        per_node = tuple(
            test(residuals[:, [i]], np.delete(residuals, i, axis=1)).dependence for i in range(g.p)
        )
    total = float(sum(per_node) + lam * g.edge_count)
    return ScoreReport(g, per_node, g.edge_count, lam, total)


class GraphScorer:
    """Memoized ``score_graph`` sharing one residual cache"""

    def __init__(self, data: Dataset, rm: RegressionMethod, lam: float, test: Optional[IndependenceTest]):
        self.data = data
        self.lam = lam
        self.test = test or HsicTest()
        self.cache = ResidualCache(data, rm)
        self._reports: Dict[Dag, ScoreReport] = {}

    @property
    def scored(self) -> int:
        return len(self._reports)

    def __call__(self, g: Dag) -> ScoreReport:
        if g not in self._reports:
            self._reports[g] = score_graph(self.data, g, self.cache.rm, self.lam, self.test, self.cache)
        return self._reports[g]


def brute_force(
    data: Dataset,
    rm: RegressionMethod,
    lam: float = DEFAULT_LAMBDA,
    test: Optional[IndependenceTest] = None,
    max_nodes: int = BRUTE_FORCE_CAP,
) -> DiscoveryResult:
    """Exact score minimizer over every DAG; ties go to the smallest sorted edge list"""
    if data.p > max_nodes:
        raise RefusalError(
            f"brute force on p={data.p} nodes means scoring {count_dags(data.p):,} DAGs; "
            f"cap is p={max_nodes}"
        )
    scorer = GraphScorer(data, rm, lam, test)
    graphs = enumerate_dags(data.p, max_nodes=max_nodes)
    logger.info("brute force: scoring %d DAGs on p=%d", len(graphs), data.p)
    best = min((scorer(g) for g in graphs), key=lambda r: (r.total, r.graph.sorted_edges()))
    diagnostics = {"method": "brute_force", "graphs_scored": len(graphs), "regressions": scorer.cache.fits}
    return DiscoveryResult(best.graph, best.graph.topological_order(), best, diagnostics)


def _ordered_moves(report: ScoreReport, rng: np.random.Generator) -> List[EdgeMove]:
    """
    Neighbour edits grouped by the node whose parent set they change. Nodes
    are drawn without replacement with weight proportional to the reciprocal
    p-value of their residual test; edits within a node are shuffled.
    """
    p = report.graph.p
    dms = np.asarray(report.per_node_dm, dtype=float)
    weights = np.maximum(np.power(10.0, dms - dms.max()), 1e-300)
    node_order = rng.choice(p, size=p, replace=False, p=weights / weights.sum())
    by_node: Dict[int, List[EdgeMove]] = {j: [] for j in range(p)}
    for move in neighbor_moves(report.graph):
        by_node[move.target].append(move)
    ordered: List[EdgeMove] = []
    for node in node_order:
        group = by_node[int(node)]
        ordered.extend(group[k] for k in rng.permutation(len(group)))
    return ordered


def _scan(moves: List[EdgeMove], scorer: GraphScorer, threshold: float) -> Tuple[Optional[ScoreReport], Optional[ScoreReport]]:
    """
    Score moves in order until an improvement on ``threshold`` is in hand and
    at least p moves were scored. Returns (best improving report or None,
    best report seen).
    """
    budget = min(scorer.data.p, len(moves))
    best: Optional[ScoreReport] = None
    for scored, move in enumerate(moves, start=1):
        report = scorer(move.graph)
        if best is None or report.total < best.total:
            best = report
        if best.total < threshold and scored >= budget:
            return best, best
    if best is not None and best.total < threshold:
        return best, best
    return None, best


def gds(
    data: Dataset,
    rm: RegressionMethod,
    lam: float = DEFAULT_LAMBDA,
    seed: int = 0,
    test: Optional[IndependenceTest] = None,
    max_steps: Optional[int] = None,
) -> DiscoveryResult:
    """Greedy DAG search from the empty graph with a one-step tabu look-ahead"""
    if data.p < 2:
        raise InvalidInputError("greedy search needs p >= 2")
    rng = np.random.default_rng(seed)
    scorer = GraphScorer(data, rm, lam, test)
    current = scorer(Dag.empty(data.p))
    previous: Optional[Dag] = None
    steps = tabu_events = 0
    limit = max_steps if max_steps is not None else 100 * data.p ** 2

    while steps < limit:
        moves = [m for m in _ordered_moves(current, rng) if m.graph != previous]
        better, best = _scan(moves, scorer, current.total)
        if better is not None:
            previous, current = current.graph, better
            steps += 1
            logger.debug("gds step %d: score %.4f, %d edges", steps, current.total, current.edge_count)
            continue
        if best is None:
            break
        look_ahead = [m for m in _ordered_moves(best, rng) if m.graph != current.graph]
        better, _ = _scan(look_ahead, scorer, current.total)
        if better is None:
            break
        previous, current = best.graph, better
        steps += 1
        tabu_events += 1
        logger.debug("gds step %d via look-ahead: score %.4f", steps, current.total)

    logger.info("gds: %d steps, %d look-ahead moves, %d graphs scored", steps, tabu_events, scorer.scored)
    diagnostics = {
        "method": "gds",
        "seed": seed,
        "steps": steps,
        "tabu_events": tabu_events,
        "graphs_scored": scorer.scored,
        "regressions": scorer.cache.fits,
        "step_limit_reached": steps >= limit,
    }
    return DiscoveryResult(current.graph, current.graph.topological_order(), current, diagnostics)


def resit(
    data: Dataset,
    rm: RegressionMethod,
    alpha: float = DEFAULT_ALPHA,
    test: Optional[IndependenceTest] = None,
) -> DiscoveryResult:
    """
    Phase 1 regresses every remaining variable on the others and removes the
    one with the least dependent residuals as the next sink. Phase 2 visits
    nodes in causal order and drops each candidate parent (ascending index)
    whenever the residuals stay independent of all earlier variables at
    level ``alpha``.
    """
    if data.n < MIN_ROWS:
        raise InvalidInputError(f"RESIT needs n >= {MIN_ROWS}, got {data.n}")
    if data.p < 2:
        raise InvalidInputError("RESIT needs p >= 2")
    test = test or HsicTest()
    cache = ResidualCache(data, rm)

    remaining = list(range(data.p))
    order: List[int] = []
    candidates: Dict[int, set] = {}
    sink_p_values: List[float] = []
    rejected_steps = 0
    logger.info("resit phase 1: ordering %d variables", data.p)
    while len(remaining) > 1:
        trials = []
        for k in remaining:
            others = [j for j in remaining if j != k]
            result = test(cache.residuals(k, others)[:, None], data.columns(others))
            logger.debug("resit phase 1: node %d p=%.3g", k, result.p_value)
            trials.append((result.dependence, result.statistic, k, result))
        _, _, sink, result = min(trials, key=lambda t: t[:3])
        remaining.remove(sink)
        order.insert(0, sink)
        candidates[sink] = set(remaining)
        sink_p_values.append(result.p_value)
        if result.p_value < alpha:
            rejected_steps += 1
    order.insert(0, remaining[0])
    candidates[remaining[0]] = set()

    logger.info("resit phase 2: pruning at alpha=%g", alpha)
    dropped: List[str] = []
    tests = 0
    for k, node in enumerate(order):
        earlier = order[:k]
        for parent in sorted(candidates[node]):
            trial = candidates[node] - {parent}
            result = test(cache.residuals(node, trial)[:, None], data.columns(earlier))
            tests += 1
            if result.p_value >= alpha:
                candidates[node].discard(parent)
                dropped.append(f"{parent}->{node}")

    g = Dag(data.p, frozenset((parent, node) for node, parents in candidates.items() for parent in parents))
    diagnostics = {
        "method": "resit",
        "alpha": alpha,
        "phase1.sink_p_values": sink_p_values,
        "phase1.rejected_steps": rejected_steps,
        "phase2.tests": tests,
        "phase2.dropped": ";".join(dropped),
        "regressions": cache.fits,
    }
    return DiscoveryResult(g, TopologicalOrder(tuple(order)), None, diagnostics)


def infer_direction(
    x,
    y,
    rm: RegressionMethod,
    test: Optional[IndependenceTest] = None,
    rejection_floor: float = 0.0,
) -> DirectionVerdict:
    """
    Fit y on x and x on y and test each residual against its regressor.
    The model with the larger p-value wins; both below ``rejection_floor``
    or an exact tie leaves the pair undecided.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise InvalidInputError(f"x and y lengths differ: {x.size} vs {y.size}")
    if x.size < MIN_ROWS:
        raise InvalidInputError(f"direction inference needs n >= {MIN_ROWS}, got {x.size}")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return DirectionVerdict(1.0, 1.0, "undecided", 1.0, degenerate=True)
    test = test or HsicTest()
    cache = ResidualCache(Dataset(np.column_stack([x, y]), ("x", "y")), rm)
    forward = test(cache.residuals(1, (0,))[:, None], x[:, None])
    backward = test(cache.residuals(0, (1,))[:, None], y[:, None])
    log_f, log_b = forward.log10_p_value, backward.log10_p_value
    if log_f == log_b or max(forward.p_value, backward.p_value) < rejection_floor:
        decision = "undecided"
    elif log_f > log_b:
        decision = "x_causes_y"
    else:
        decision = "y_causes_x"
    return DirectionVerdict(
        forward.p_value,
        backward.p_value,
        decision,
        max(forward.p_value, backward.p_value),
        log_f,
        log_b,
    )


def discover(
    data: Dataset,
    method: str,
    rm: RegressionMethod,
    alpha: float = DEFAULT_ALPHA,
    lam: float = DEFAULT_LAMBDA,
    seed: int = 0,
    test: Optional[IndependenceTest] = None,
    max_nodes: int = BRUTE_FORCE_CAP,
) -> DiscoveryResult:
    if method == "resit":
        return resit(data, rm, alpha, test)
    if method == "gds":
        return gds(data, rm, lam, seed, test)
    if method == "brute_force":
        return brute_force(data, rm, lam, test, max_nodes)
    raise InvalidInputError(f"unknown discovery method {method!r}; choose from {DISCOVERY_METHODS}")
