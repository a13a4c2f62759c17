"""Shared fixtures: small datasets, graphs and an exact independence oracle."""

import numpy as np
import pytest

from components.independence import HsicResult
from components.regression import RegressionFit
from models.dataset import Dataset
from models.graphs import Dag


@pytest.fixture
def chain3():
    return Dag(3, frozenset({(0, 1), (1, 2)}))


@pytest.fixture
def collider3():
    return Dag(3, frozenset({(0, 1), (2, 1)}))


@pytest.fixture
def linear_pair():
    """x -> y with uniform cause and uniform noise, identifiable by a linear fit"""
    rng = np.random.default_rng(11)
    x = rng.uniform(-1.0, 1.0, 500)
    y = x + rng.uniform(-1.0, 1.0, 500)
    return Dataset.from_array(np.column_stack([x, y]), ["x", "y"])


@pytest.fixture
def independent_columns():
    rng = np.random.default_rng(5)
    return Dataset.from_array(rng.uniform(-1.0, 1.0, size=(200, 3)))


class IndependenceOracle:
    """
    Exact stand-in for a regression method plus independence test on an ANM
    with known graph. Residual vectors carry their (response, predictors) key
    in the first entries so the test can decide independence graphically: the
    residual of k on S is independent of the columns T iff S holds every
    parent of k and neither S nor T holds a descendant of k.
    """

    def __init__(self, graph: Dag, n: int = 30, seed: int = 0):
        self.graph = graph
        self.data = Dataset.from_array(np.random.default_rng(seed).normal(size=(n, graph.p)))

    def regression(self, data, response, predictors):
        residuals = np.zeros(data.n)
        residuals[0] = response
        for j in predictors:
            residuals[1 + j] = 1.0
        fitted = data.column(response) - residuals
        return RegressionFit("oracle", response, tuple(predictors), fitted, residuals)

    def _columns(self, block):
        return {j for j in range(self.data.p) for c in range(block.shape[1])
                if np.array_equal(block[:, c], self.data.column(j))}

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float).reshape(self.data.n, -1)[:, 0]
        y = np.asarray(y, dtype=float).reshape(self.data.n, -1)
        k = int(x[0])
        given = {j for j in range(self.data.p) if x[1 + j] == 1.0}
        tested = self._columns(y)
        below = self.graph.descendants(k)
        independent = self.graph.parents(k) <= given and not (given | tested) & below
        p_value = 0.5 if independent else 1e-12
        return HsicResult(0.0 if independent else 1.0, self.data.n, p_value, 1.0, 1.0, "gamma",
                          float(np.log10(p_value)))


@pytest.fixture
def oracle_factory():
    return IndependenceOracle


def write_pair_directory(directory, pairs, metadata_rows=None):
    """Write ``pairmeta.txt`` and one sample file per (id, x, y, weight, x_is_cause)"""
    directory.mkdir(parents=True, exist_ok=True)
    rows = []
    for pair_id, x, y, weight, x_is_cause in pairs:
        np.savetxt(directory / f"pair{pair_id}.txt", np.column_stack([x, y]), fmt="%.10f")
        rows.append(f"{pair_id} 1 1 2 2 {weight}" if x_is_cause else f"{pair_id} 2 2 1 1 {weight}")
    (directory / "pairmeta.txt").write_text("\n".join((metadata_rows or []) + rows) + "\n")
    return directory


@pytest.fixture
def pair_directory(tmp_path):
    """Six linear non-Gaussian pairs, half of them stored effect-first"""
    rng = np.random.default_rng(3)
    pairs = []
    for k in range(6):
        cause = rng.uniform(-1.0, 1.0, 300)
        effect = cause + 0.5 * rng.uniform(-1.0, 1.0, 300)
        if k % 2 == 0:
            pairs.append((f"{k + 1:04d}", cause, effect, 1.0, True))
        else:
            pairs.append((f"{k + 1:04d}", effect, cause, 1.0, False))
    return write_pair_directory(tmp_path / "pairs", pairs)
