"""
Random DAGs and structural equation model samplers.

Every sampler is a deterministic function of its inputs and seed: one
``numpy.random.Generator`` per call, consumed in a fixed order.
"""

from itertools import combinations
from typing import Iterable, Mapping, Optional, Tuple

import numpy as np

from models.dataset import Dataset
from models.graphs import Dag, Edge
from models.sem import (
    BernoulliTable,
    DiscreteCpt,
    GaussianNoise,
    LinearMechanism,
    ScaledPowerGaussian,
    SemSpec,
    SimConfig,
    TabulatedMechanism,
)
from utils.error_handler import InvalidInputError, get_logger
from utils.kernels import rbf_gram, stable_cholesky, standardize

logger = get_logger(__name__)

COEFFICIENT_RANGE = (0.1, 2.0)
NOISE_SCALE_RANGE = (0.1, 0.5)
NOISE_EXPONENT_RANGE = (2.0, 4.0)
NOISE_VARIANCE_RANGE = (0.1, 0.5)
GP_BANDWIDTH = 1.0
CPT_RANGE = (0.1, 0.9)


def replicate_seed(base_seed: int, *keys: int) -> int:
    """Independent 64-bit seed for one replicate, derived from a base seed and integer keys"""
    sequence = np.random.SeedSequence([int(base_seed), *(int(k) for k in keys)])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def _ordered_random_dag(p: int, rng: np.random.Generator, edge_prob: float) -> Dag:
    order = rng.permutation(p)
    pairs = list(combinations(range(p), 2))
    draws = rng.random(len(pairs))
    edges = frozenset(
        (int(order[a]), int(order[b])) for (a, b), u in zip(pairs, draws) if u < edge_prob
    )
    return Dag(p, edges)


def random_dag(p: int, seed: int, edge_prob: Optional[float] = None) -> Dag:
    """Random order, then each forward pair kept with probability min(1, 2/(p-1)), so about p edges"""
    if p < 1:
        raise InvalidInputError(f"node count must be >= 1, got {p}")
    if p == 1:
        return Dag.empty(1)
    prob = min(1.0, 2.0 / (p - 1)) if edge_prob is None else float(edge_prob)
    return _ordered_random_dag(p, np.random.default_rng(seed), prob)


def random_baseline_dag(p: int, seed: int) -> Dag:
    """Baseline estimate: random order, edge inclusion probability itself drawn from U(0, 1)"""
    if p < 1:
        raise InvalidInputError(f"node count must be >= 1, got {p}")
    rng = np.random.default_rng(seed)
    prob = rng.uniform(0.0, 1.0)
    return _ordered_random_dag(p, rng, prob)


def _names(p: int):
    return tuple(f"X{j}" for j in range(p))


def sample_linear_sem(
    g: Dag,
    n: int,
    seed: int,
    coefficients: Optional[Mapping[Edge, float]] = None,
    noiseless: Iterable[int] = (),
) -> Tuple[Dataset, SemSpec]:
    """
    Linear SEM with heavy-tailed noise K * sign(M) * |M|^alpha.

    Coefficients are uniform on [-2, -0.1] u [0.1, 2]; ``coefficients``
    overrides individual edges and nodes in ``noiseless`` get zero noise.
    """
    rng = np.random.default_rng(seed)
    betas = {}
    for edge in g.sorted_edges():
        magnitude = rng.uniform(*COEFFICIENT_RANGE)
        betas[edge] = magnitude if rng.random() < 0.5 else -magnitude
    for edge, beta in (coefficients or {}).items():
        if tuple(edge) not in g.edges:
            raise InvalidInputError(f"coefficient override for missing edge {edge}")
        betas[tuple(edge)] = float(beta)
    silent = set(noiseless)

    noises = []
    draws = np.zeros((n, g.p))
    for j in range(g.p):
        scale = rng.uniform(*NOISE_SCALE_RANGE)
        exponent = rng.uniform(*NOISE_EXPONENT_RANGE)
        noise = ScaledPowerGaussian(0.0 if j in silent else scale, exponent)
        draws[:, j] = noise.sample(rng, n)
        noises.append(noise)

    mechanisms = tuple(
        LinearMechanism(tuple((k, betas[(k, j)]) for k in sorted(g.parents(j))))
        for j in range(g.p)
    )
    values = np.zeros((n, g.p))
    for j in g.topological_order():
        values[:, j] = mechanisms[j].evaluate(values) + draws[:, j]
    spec = SemSpec(g, mechanisms, tuple(noises), "linear_nongauss", draws)
    return Dataset(values, _names(g.p)), spec


def _gp_sample_path(inputs: np.ndarray, rng: np.random.Generator, standardize_inputs: bool) -> np.ndarray:
    points = standardize(inputs) if standardize_inputs else inputs
    factor, _ = stable_cholesky(rbf_gram(points, GP_BANDWIDTH))
    return factor @ rng.standard_normal(inputs.shape[0])


def sample_nonlinear_sem(
    g: Dag,
    n: int,
    seed: int,
    noise_variance_range: Tuple[float, float] = NOISE_VARIANCE_RANGE,
    additive: bool = True,
    standardize_inputs: bool = False,
) -> Tuple[Dataset, SemSpec]:
    """
    Additive-noise SEM whose functions are Gaussian-process sample paths with
    RBF bandwidth one, drawn jointly at the observed parent values, plus
    Gaussian noise of variance ~ U(noise_variance_range).
    """
    rng = np.random.default_rng(seed)
    noises = []
    draws = np.zeros((n, g.p))
    for j in range(g.p):
        noise = GaussianNoise(rng.uniform(*noise_variance_range))
        draws[:, j] = noise.sample(rng, n)
        noises.append(noise)

    values = np.zeros((n, g.p))
    mechanisms = [None] * g.p
    for j in g.topological_order():
        parents = tuple(sorted(g.parents(j)))
        inputs = values[:, list(parents)].copy()
        if not parents:
            table = np.zeros((n, 0))
        elif additive:
            table = np.column_stack(
                [_gp_sample_path(inputs[:, [c]], rng, standardize_inputs) for c in range(len(parents))]
            )
        else:
            table = _gp_sample_path(inputs, rng, standardize_inputs)[:, None]
        mechanisms[j] = TabulatedMechanism(parents, inputs, table, additive)
        values[:, j] = table.sum(axis=1) + draws[:, j]
    spec = SemSpec(g, tuple(mechanisms), tuple(noises), "nonlinear_gauss", draws)
    return Dataset(values, _names(g.p)), spec


def random_binary_sem(g: Dag, seed: int) -> SemSpec:
    """Binary SEM on ``g`` with every conditional probability drawn from U(0.1, 0.9)"""
    rng = np.random.default_rng(seed)
    mechanisms = []
    for j in range(g.p):
        parents = tuple(sorted(g.parents(j)))
        mechanisms.append(DiscreteCpt(parents, rng.uniform(*CPT_RANGE, size=(2,) * len(parents))))
    return SemSpec(g, tuple(mechanisms), tuple(BernoulliTable() for _ in range(g.p)), "binary")


def sample_sem(g: Dag, config: SimConfig, seed: int) -> Tuple[Dataset, SemSpec]:
    if config.regime == "linear_nongauss":
        return sample_linear_sem(g, config.n, seed)
    return sample_nonlinear_sem(
        g,
        config.n,
        seed,
        noise_variance_range=config.noise_variance_range,
        additive=config.additive,
        standardize_inputs=config.standardize_inputs,
    )


def simulate(config: SimConfig) -> Tuple[Dag, Dataset, SemSpec]:
    """Draw a random DAG and a sample from the configured regime on it"""
    g = random_dag(config.p, replicate_seed(config.seed, 0), config.edge_prob)
    data, spec = sample_sem(g, config, replicate_seed(config.seed, 1))
    logger.debug("simulated %s p=%d n=%d with %d edges", config.regime, config.p, config.n, g.edge_count)
    return g, data, spec
