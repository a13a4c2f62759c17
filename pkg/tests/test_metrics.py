"""Tests for SHD, graphical SID, the exact interventional oracle and SID bounds."""

import math
from itertools import permutations

import numpy as np
import pytest

from components.metrics import (
    evaluate_estimate,
    parent_adjustment_valid,
    shd,
    sid,
    sid_bounds,
    sid_oracle,
)
from components.simulation import random_baseline_dag, random_dag, replicate_seed
from models.graphs import Dag, Pdag, as_pdag, cpdag, dag_extensions, enumerate_dags
from utils.error_handler import InvalidInputError, RefusalError


def _bad_pairs(result):
    p = result.good_matrix.shape[0]
    return {(i, j) for i, j in permutations(range(p), 2) if not result.good_matrix[i, j]}


def test_shd_examples():
    g = Dag(3, frozenset({(0, 1), (1, 2)}))
    assert shd(g, g) == 0
    assert shd(Dag.empty(3), g) == 2
    assert shd(Dag(2, frozenset({(0, 1)})), Pdag(2, undirected=frozenset({frozenset({0, 1})}))) == 1
    assert shd(Dag(2, frozenset({(0, 1)})), Dag(2, frozenset({(1, 0)}))) == 1
    with pytest.raises(InvalidInputError):
        shd(Dag.empty(2), Dag.empty(3))


def test_shd_is_a_metric():
    graphs = [cpdag(g) for g in enumerate_dags(3)] + enumerate_dags(3)
    rng = np.random.default_rng(0)
    for _ in range(300):
        a, b, c = (graphs[k] for k in rng.integers(len(graphs), size=3))
        assert shd(a, b) == shd(b, a)
        assert shd(a, a) == 0
        assert (shd(a, b) == 0) == (as_pdag(a) == as_pdag(b))
        assert shd(a, c) <= shd(a, b) + shd(b, c)


def test_sid_of_identical_graphs_is_zero():
    for g in enumerate_dags(3):
        result = sid(g, g)
        assert result.bad_pairs == 0 and result.lower == result.upper == 0


def test_sid_reversed_edge():
    result = sid(Dag(2, frozenset({(0, 1)})), Dag(2, frozenset({(1, 0)})))
    assert (0, 1) in _bad_pairs(result)


def test_sid_golden_fork_against_chain():
    truth = Dag(3, frozenset({(0, 1), (0, 2)}))
    estimate = Dag(3, frozenset({(1, 0), (0, 2)}))
    result = sid(truth, estimate)
    assert result.bad_pairs == 3
    assert _bad_pairs(result) == {(0, 1), (1, 0), (1, 2)}
    assert _bad_pairs(sid_oracle(truth, estimate)) == _bad_pairs(result)


def test_sid_chain_against_empty_estimate():
    # adjusting for the empty set gives p(x_j | x_i), which is interventional for the source 0
    truth = Dag(3, frozenset({(0, 1), (1, 2)}))
    result = sid(truth, Dag.empty(3))
    assert _bad_pairs(result) == {(1, 0), (2, 0), (2, 1)}
    assert _bad_pairs(sid_oracle(truth, Dag.empty(3), seed=7)) == _bad_pairs(result)


def test_sid_is_not_symmetric():
    edge = Dag(2, frozenset({(0, 1)}))
    assert sid(Dag.empty(2), edge).bad_pairs == 0
    assert sid(edge, Dag.empty(2)).bad_pairs == 1


def test_parent_adjustment_criterion():
    truth = Dag(3, frozenset({(0, 1), (1, 2)}))
    assert not parent_adjustment_valid(truth, 0, 2, {1})
    assert parent_adjustment_valid(truth, 2, 0, {1})
    assert parent_adjustment_valid(truth, 1, 2, {0})


def test_oracle_agrees_with_graphical_sid_on_random_instances():
    disagreements = []
    for k in range(200):
        p = 2 + k % 4
        truth = random_dag(p, replicate_seed(1, k))
        estimate = random_baseline_dag(p, replicate_seed(2, k))
        graphical = sid(truth, estimate)
        exact = sid_oracle(truth, estimate, trials=5, seed=k)
        if not np.array_equal(graphical.good_matrix, exact.good_matrix):
            disagreements.append((truth.sorted_edges(), estimate.sorted_edges()))
    assert disagreements == []


def test_oracle_agrees_on_every_three_node_pair():
    graphs = enumerate_dags(3)
    for truth in graphs:
        for estimate in graphs:
            assert np.array_equal(sid(truth, estimate).good_matrix, sid_oracle(truth, estimate, trials=2).good_matrix)


def test_oracle_refuses_large_graphs():
    with pytest.raises(RefusalError):
        sid_oracle(Dag.empty(7), Dag.empty(7))
    with pytest.raises(InvalidInputError):
        sid_oracle(Dag.empty(2), Dag.empty(2), trials=0)


def test_sid_bounds_singleton_class():
    collider = Dag(3, frozenset({(0, 1), (2, 1)}))
    result = sid_bounds(collider, cpdag(collider))
    assert result.lower == result.upper == 0


def test_sid_bounds_chain_class():
    truth = Dag(3, frozenset({(0, 1), (1, 2)}))
    c = cpdag(truth)
    result = sid_bounds(truth, c)
    reversed_chain = Dag(3, frozenset({(2, 1), (1, 0)}))
    assert result.lower == 0
    assert result.upper == max(sid(truth, d).bad_pairs for d in dag_extensions(c))
    assert result.upper >= sid(truth, reversed_chain).bad_pairs


def test_sid_bounds_bracket_every_member():
    rng = np.random.default_rng(3)
    graphs = enumerate_dags(4)
    for _ in range(40):
        truth, estimate = (graphs[k] for k in rng.integers(len(graphs), size=2))
        c = cpdag(estimate)
        bounds = sid_bounds(truth, c)
        for member in dag_extensions(c):
            assert bounds.lower <= sid(truth, member).bad_pairs <= bounds.upper
        assert bounds.upper <= 12


def test_evaluate_estimate_rows():
    truth = Dag(3, frozenset({(0, 1), (1, 2)}))
    row = evaluate_estimate(truth, truth)
    assert row == {"shd_dag": 0, "shd_cpdag": 0, "sid_lower": 0, "sid_upper": 0}
    class_row = evaluate_estimate(truth, cpdag(truth))
    assert class_row["shd_dag"] == 2 and class_row["shd_cpdag"] == 0
    assert class_row["sid_lower"] == 0 and class_row["sid_upper"] >= class_row["sid_lower"]
    shd_only = evaluate_estimate(truth, Dag.empty(3), ["shd"])
    assert set(shd_only) == {"shd_dag", "shd_cpdag"}
    with pytest.raises(InvalidInputError):
        evaluate_estimate(truth, truth, ["aic"])


def test_evaluate_estimate_skips_bounds_for_large_classes():
    truth = Dag.empty(6)
    estimate = Pdag(6, undirected=frozenset({frozenset({0, 1})}))
    row = evaluate_estimate(truth, estimate)
    assert math.isnan(row["sid_lower"]) and math.isnan(row["sid_upper"])
