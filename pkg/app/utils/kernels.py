"""
Kernel helpers shared by the HSIC test, kernel ridge regression and the
Gaussian-process SEM sampler.
"""

from typing import Optional, Tuple

import numpy as np
from scipy.spatial.distance import pdist, squareform

from utils.error_handler import StructuralError, get_logger

logger = get_logger(__name__)

BANDWIDTH_ROWS = 500
JITTER_START = 1e-10
JITTER_STOP = 1e-4


def as_block(values) -> np.ndarray:
    block = np.asarray(values, dtype=float)
    return block[:, None] if block.ndim == 1 else block


def standardize(block: np.ndarray) -> np.ndarray:
    """Zero-mean unit-variance columns; constant columns become zeros"""
    block = as_block(block)
    centered = block - block.mean(axis=0)
    scale = block.std(axis=0)
    scale[scale == 0] = 1.0
    return centered / scale


def median_bandwidth(block: np.ndarray, max_rows: int = BANDWIDTH_ROWS) -> Optional[float]:
    """
    Median heuristic sqrt(median(d^2) / 2) over nonzero squared distances,
    on at most ``max_rows`` evenly spaced rows. None when all rows coincide.
    """
    block = as_block(block)
    if block.shape[0] > max_rows:
        rows = np.linspace(0, block.shape[0] - 1, max_rows).round().astype(int)
        block = block[rows]
    dists = pdist(block, "sqeuclidean")
    dists = dists[dists > 0]
    if dists.size == 0:
        return None
    return float(np.sqrt(0.5 * np.median(dists)))


def rbf_gram(block: np.ndarray, bandwidth: float) -> np.ndarray:
    sq = squareform(pdist(as_block(block), "sqeuclidean"))
    return np.exp(-sq / (2.0 * bandwidth ** 2))


def stable_cholesky(matrix: np.ndarray, start: float = JITTER_START, stop: float = JITTER_STOP) -> Tuple[np.ndarray, float]:
    """Lower Cholesky factor, adding diagonal jitter x10 from ``start`` up to ``stop``"""
    jitter = start
    identity = np.eye(matrix.shape[0])
    while jitter <= stop * (1 + 1e-9):
        try:
            factor = np.linalg.cholesky(matrix + jitter * identity)
        except np.linalg.LinAlgError:
            jitter *= 10.0
            continue
        if jitter > start:
            logger.debug("cholesky needed jitter %.0e", jitter)
        return factor, jitter
    raise StructuralError(f"matrix not positive definite even with jitter {stop:g}")
