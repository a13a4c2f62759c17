"""
HSIC independence test.

The statistic is the biased estimate (1/n^2) trace(K H L H) with RBF Gram
matrices on standardized blocks and median-heuristic bandwidths. p-values come
from a gamma fit to the null of n * HSIC by its first two moments, or from row
permutations of the second block.
"""

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.stats import gamma

from utils.error_handler import InvalidInputError, get_logger
from utils.kernels import BANDWIDTH_ROWS, as_block, median_bandwidth, rbf_gram, standardize

logger = get_logger(__name__)

# p-values are floored at 10^-350, so the dependence measure never exceeds 350
P_VALUE_FLOOR_EXPONENT = 350.0
GAMMA_MIN_ROWS = 6
HSIC_METHODS = ("gamma", "permutation")
INDEPENDENCE_MODES = ("joint", "pairwise")


@dataclass(frozen=True)
class HsicResult:
    statistic: float
    n: int
    p_value: float
    gamma_shape: float
    gamma_scale: float
    method: str
    log10_p_value: float
    degenerate: bool = False

    @property
    def dependence(self) -> float:
        return dependence_from_log10(self.log10_p_value)


@dataclass(frozen=True)
class HsicOptions:
    method: str = "gamma"
    permutations: int = 1000
    seed: int = 0
    max_bandwidth_rows: int = BANDWIDTH_ROWS

    def __post_init__(self):
        if self.method not in HSIC_METHODS:
            raise InvalidInputError(f"unknown HSIC method {self.method!r}; choose from {HSIC_METHODS}")
        if self.permutations < 1:
            raise InvalidInputError("permutations must be >= 1")


def dependence_from_log10(log10_p_value: float) -> float:
    return max(0.0, min(-float(log10_p_value), P_VALUE_FLOOR_EXPONENT))


def dependence_from_pvalue(p_value: float) -> float:
    """-log10 of the p-value floored at 10^-350"""
    if p_value <= 0.0:
        return P_VALUE_FLOOR_EXPONENT
    return dependence_from_log10(math.log10(p_value))


def _prepare(x, y) -> Tuple[np.ndarray, np.ndarray]:
    x, y = as_block(x), as_block(y)
    if x.shape[0] != y.shape[0]:
        raise InvalidInputError(f"row counts differ: {x.shape[0]} vs {y.shape[0]}")
    if x.shape[0] < 4:
        raise InvalidInputError(f"HSIC needs n >= 4, got {x.shape[0]}")
    return x, y


def _gram(block: np.ndarray, bandwidth: Optional[float], max_rows: int) -> Optional[np.ndarray]:
    z = standardize(block)
    if bandwidth is None:
        bandwidth = median_bandwidth(z, max_rows)
        if bandwidth is None:
            return None
    return rbf_gram(z, bandwidth)


def _center(gram: np.ndarray) -> np.ndarray:
    means = gram.mean(axis=0)
    return gram - means[None, :] - means[:, None] + means.mean()


def _gram_pair(x, y, bandwidths, max_rows):
    bx, by = bandwidths if bandwidths is not None else (None, None)
    return _gram(x, bx, max_rows), _gram(y, by, max_rows)


def hsic_statistic(x, y, bandwidths: Optional[Tuple[float, float]] = None, max_rows: int = BANDWIDTH_ROWS) -> float:
    x, y = _prepare(x, y)
    k, l = _gram_pair(x, y, bandwidths, max_rows)
    if k is None or l is None:
        return 0.0
    n = x.shape[0]
    return max(0.0, float(np.sum(_center(k) * _center(l))) / n ** 2)


def _null_moments(k: np.ndarray, l: np.ndarray, kc: np.ndarray, lc: np.ndarray) -> Tuple[float, float]:
    """Mean and variance of the biased HSIC estimate under independence"""
    n = k.shape[0]
    var = (kc * lc / 6.0) ** 2
    var = (var.sum() - np.trace(var)) / n / (n - 1)
    var *= 72.0 * (n - 4) * (n - 5) / n / (n - 1) / (n - 2) / (n - 3)
    mu_x = (k.sum() - np.trace(k)) / n / (n - 1)
    mu_y = (l.sum() - np.trace(l)) / n / (n - 1)
    mean = (1.0 + mu_x * mu_y - mu_x - mu_y) / n
    return float(mean), float(var)


def _degenerate(n: int, method: str) -> HsicResult:
    return HsicResult(0.0, n, 1.0, math.nan, math.nan, method, 0.0, degenerate=True)


def permutation_null(x, y, permutations: int = 1000, seed: int = 0, max_rows: int = BANDWIDTH_ROWS) -> np.ndarray:
    """HSIC statistics after shuffling the rows of ``y``; zeros for degenerate input"""
    x, y = _prepare(x, y)
    k, l = _gram_pair(x, y, None, max_rows)
    if k is None or l is None:
        return np.zeros(permutations)
    return _permuted_statistics(_center(k), l, permutations, seed)


def _permuted_statistics(kc: np.ndarray, l: np.ndarray, permutations: int, seed: int) -> np.ndarray:
    n = kc.shape[0]
    rng = np.random.default_rng(seed)
    null = np.empty(permutations)
    for b in range(permutations):
        perm = rng.permutation(n)
        null[b] = np.sum(kc * l[np.ix_(perm, perm)]) / n ** 2
    return null


def hsic_pvalue(x, y, options: HsicOptions = HsicOptions(), bandwidths: Optional[Tuple[float, float]] = None) -> HsicResult:
    x, y = _prepare(x, y)
    n = x.shape[0]
    k, l = _gram_pair(x, y, bandwidths, options.max_bandwidth_rows)
    if k is None or l is None:
        return _degenerate(n, options.method)
    kc, lc = _center(k), _center(l)
    statistic = max(0.0, float(np.sum(kc * lc)) / n ** 2)

    shape = scale = math.nan
    if n >= GAMMA_MIN_ROWS:
        mean, var = _null_moments(k, l, kc, lc)
        if mean > 0 and var > 0:
            shape, scale = mean ** 2 / var, var * n / mean

    if options.method == "gamma":
        if n < GAMMA_MIN_ROWS:
            raise InvalidInputError(f"gamma approximation needs n >= {GAMMA_MIN_ROWS}; use permutations")
        if math.isnan(shape):
            return _degenerate(n, options.method)
        log10_p = float(gamma.logsf(n * statistic, shape, scale=scale)) / math.log(10.0)
        log10_p = min(0.0, log10_p)
        return HsicResult(statistic, n, 10.0 ** log10_p, shape, scale, "gamma", log10_p)

    null = _permuted_statistics(kc, l, options.permutations, options.seed)
    exceed = np.count_nonzero(null >= statistic - 1e-12 * max(1.0, statistic))
    p_value = (1 + exceed) / (options.permutations + 1)
    return HsicResult(statistic, n, p_value, shape, scale, "permutation", math.log10(p_value))


def dependence_measure(residual, others, options: HsicOptions = HsicOptions()) -> float:
    others = as_block(others)
    if others.shape[1] < 1:
        raise InvalidInputError("dependence measure needs at least one other variable")
    return hsic_pvalue(residual, others, options).dependence


IndependenceTest = Callable[[np.ndarray, np.ndarray], HsicResult]


@dataclass(frozen=True)
class HsicTest:
    """
    Independence test used by the learners. ``joint`` runs one HSIC test of
    x against the whole y block; ``pairwise`` tests each column of y on its
    own and Bonferroni-combines the smallest p-value.
    """

    options: HsicOptions = HsicOptions()
    mode: str = "joint"

    def __post_init__(self):
        if self.mode not in INDEPENDENCE_MODES:
            raise InvalidInputError(f"unknown independence mode {self.mode!r}; choose from {INDEPENDENCE_MODES}")

    def __call__(self, x, y) -> HsicResult:
        y = as_block(y)
        if self.mode == "joint" or y.shape[1] == 1:
            return hsic_pvalue(x, y, self.options)
        results = [hsic_pvalue(x, y[:, [j]], self.options) for j in range(y.shape[1])]
        worst = min(results, key=lambda r: (r.log10_p_value, -r.statistic))
        log10_p = min(0.0, worst.log10_p_value + math.log10(len(results)))
        return replace(worst, p_value=10.0 ** log10_p, log10_p_value=log10_p)
