"""
Structural Hamming distance and structural intervention distance.

SID is decided graphically: for a pair (i, j), adjusting for the estimated
parents of i is valid in the true DAG iff the set avoids the forbidden nodes
of the causal paths from i to j and d-separates i from j once the first
edges of those paths are removed. ``sid_oracle`` checks the same question
numerically on random binary SEMs.
"""

import math
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Union

import numpy as np

from components.simulation import random_binary_sem, replicate_seed
from models.graphs import Dag, Pdag, as_pdag, cpdag, d_separated, dag_extensions
from models.sem import SemSpec
from utils.error_handler import InvalidInputError, RefusalError, get_logger

logger = get_logger(__name__)

ORACLE_MAX_NODES = 6
ORACLE_TOLERANCE = 1e-9
SID_BOUNDS_MAX_NODES = 5
METRIC_COLUMNS = ("shd_dag", "shd_cpdag", "sid_lower", "sid_upper")


@dataclass(frozen=True, eq=False)
class SidResult:
    bad_pairs: int
    good_matrix: np.ndarray
    lower: int
    upper: int


def _check_same_p(a, b):
    if a.p != b.p:
        raise InvalidInputError(f"graphs differ in size: p={a.p} vs p={b.p}")


def shd(a: Union[Dag, Pdag], b: Union[Dag, Pdag]) -> int:
    """Number of node pairs whose edge type (none, i->j, j->i, undirected) differs"""
    _check_same_p(a, b)
    a, b = as_pdag(a), as_pdag(b)
    return sum(
        a.edge_type(i, j) != b.edge_type(i, j)
        for i in range(a.p)
        for j in range(i + 1, a.p)
    )


def _causal_path_nodes(g: Dag, i: int, j: int) -> FrozenSet[int]:
    """Nodes other than i lying on a directed path from i to j"""
    if j not in g.descendants(i):
        return frozenset()
    return (g.descendants(i) & g.ancestors(j)) | {j}


def parent_adjustment_valid(g_true: Dag, i: int, j: int, z: Iterable[int]) -> bool:
    """Whether sum_z p(x_j | x_i, z) p(z) equals p(x_j | do(x_i)) for every distribution Markov to g_true"""
    z = frozenset(z)
    if j in z:
        return j not in g_true.descendants(i)
    on_paths = _causal_path_nodes(g_true, i, j)
    forbidden = set(on_paths)
    for node in on_paths:
        forbidden |= g_true.descendants(node)
    if z & forbidden:
        return False
    backdoor = Dag(g_true.p, g_true.edges - {(i, c) for c in g_true.children(i) if c in on_paths})
    return d_separated(backdoor, {i}, {j}, z)


def sid(g_true: Dag, h: Dag) -> SidResult:
    _check_same_p(g_true, h)
    p = g_true.p
    good = np.ones((p, p), dtype=bool)
    for i in range(p):
        parents = h.parents(i)
        for j in range(p):
            if i != j:
                good[i, j] = parent_adjustment_valid(g_true, i, j, parents)
    bad = int(p * p - good.sum())
    return SidResult(bad, good, bad, bad)


# Exact discrete oracle


def _factor(spec: SemSpec, node: int, grid: np.ndarray) -> np.ndarray:
    """P(X_node = x_node | parents) broadcast over the full 2^p state table"""
    mechanism = spec.mechanisms[node]
    success = mechanism.table[tuple(grid[k] for k in mechanism.parents)]
    return np.where(grid[node] == 1, success, 1.0 - success)


def _marginal(table: np.ndarray, keep: Iterable[int]) -> np.ndarray:
    keep = set(keep)
    axes = tuple(a for a in range(table.ndim) if a not in keep)
    return table.sum(axis=axes, keepdims=True)


def _interventional(factors: List[np.ndarray], grid: np.ndarray, i: int, j: int, value: int) -> np.ndarray:
    """p(x_j | do(X_i = value)) by truncated factorization"""
    table = (grid[i] == value).astype(float)
    for node, factor in enumerate(factors):
        if node != i:
            table = table * factor
    return _marginal(table, {j}).ravel()


def _adjusted(joint: np.ndarray, i: int, j: int, z: FrozenSet[int], value: int) -> np.ndarray:
    """sum_z p(x_j | x_i = value, z) p(z)"""
    if j in z:
        return _marginal(joint, {j}).ravel()
    p_xz = _marginal(joint, z | {i})
    p_jxz = _marginal(joint, z | {i, j})
    p_z = _marginal(joint, z)
    estimate = (p_jxz / p_xz * p_z).sum(axis=tuple(z), keepdims=True)
    return np.take(estimate, value, axis=i).ravel()


def sid_oracle(g_true: Dag, h: Dag, trials: int = 5, seed: int = 0) -> SidResult:
    """
    Pair (i, j) is good iff, on each of ``trials`` random binary SEMs over
    g_true, parent adjustment with PA_h(i) reproduces p(x_j | do(x_i)) up to
    total variation 1e-9 for both intervention values.
    """
    _check_same_p(g_true, h)
    p = g_true.p
    if p > ORACLE_MAX_NODES:
        raise RefusalError(f"exact oracle enumerates 2^p states; p={p} exceeds cap {ORACLE_MAX_NODES}")
    if trials < 1:
        raise InvalidInputError("trials must be >= 1")
    grid = np.indices((2,) * p)
    good = np.ones((p, p), dtype=bool)
    for trial in range(trials):
        spec = random_binary_sem(g_true, replicate_seed(seed, trial))
        factors = [_factor(spec, node, grid) for node in range(p)]
        joint = np.prod(factors, axis=0)
        for i in range(p):
            z = frozenset(h.parents(i))
            for j in range(p):
                if i == j or not good[i, j]:
                    continue
                for value in (0, 1):
                    truth = _interventional(factors, grid, i, j, value)
                    estimate = _adjusted(joint, i, j, z, value)
                    if 0.5 * np.abs(truth - estimate).sum() > ORACLE_TOLERANCE:
                        good[i, j] = False
                        break
    bad = int(p * p - good.sum())
    return SidResult(bad, good, bad, bad)


def sid_bounds(g_true: Dag, c: Pdag) -> SidResult:
    """
    SID range over the DAGs represented by the completed PDAG ``c``.
    ``good_matrix`` marks pairs good for every member; ``bad_pairs`` counts
    pairs bad for at least one.
    """
    _check_same_p(g_true, c)
    if c.p > SID_BOUNDS_MAX_NODES:
        raise RefusalError(f"SID bounds enumerate the class; p={c.p} exceeds cap {SID_BOUNDS_MAX_NODES}")
    results = [sid(g_true, member) for member in dag_extensions(c)]
    good = np.logical_and.reduce([r.good_matrix for r in results])
    bad = int(c.p * c.p - good.sum())
    counts = [r.bad_pairs for r in results]
    return SidResult(bad, good, min(counts), max(counts))


def evaluate_estimate(g_true: Dag, estimate: Union[Dag, Pdag], metrics: Iterable[str] = ("shd", "sid")) -> Dict[str, float]:
    """
    Metric row for one estimate: SHD against the true DAG and between
    CPDAGs, and SID (point value for a DAG, class bounds for a CPDAG).
    """
    _check_same_p(g_true, estimate)
    metrics = set(metrics)
    unknown = metrics - {"shd", "sid"}
    if unknown:
        raise InvalidInputError(f"unknown metrics {sorted(unknown)}; choose from shd, sid")
    if isinstance(estimate, Pdag) and not estimate.undirected:
        estimate = estimate.to_dag()
    row: Dict[str, float] = {}
    if "shd" in metrics:
        row["shd_dag"] = shd(g_true, estimate)
        estimate_class = cpdag(estimate) if isinstance(estimate, Dag) else estimate
        row["shd_cpdag"] = shd(cpdag(g_true), estimate_class)
    if "sid" in metrics:
        if isinstance(estimate, Dag):
            result = sid(g_true, estimate)
        elif estimate.p <= SID_BOUNDS_MAX_NODES:
            result = sid_bounds(g_true, estimate)
        else:
            logger.warning("SID bounds skipped for p=%d class estimate", estimate.p)
            result = None
        row["sid_lower"] = result.lower if result else math.nan
        row["sid_upper"] = result.upper if result else math.nan
    return row
