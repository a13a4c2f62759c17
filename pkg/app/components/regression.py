"""
Regression methods: fit a response column on a set of predictor columns and
return in-sample residuals.

A regression method is any callable ``(data, response, predictors) ->
RegressionFit``; ``make_regression_method`` builds the two shipped ones.
"""

import functools
from dataclasses import dataclass, field
from typing import Callable, Dict, Sequence, Tuple

import numpy as np
from sklearn.kernel_ridge import KernelRidge
from sklearn.linear_model import LinearRegression, Ridge
from sklearn.model_selection import GridSearchCV, KFold
from sklearn.preprocessing import StandardScaler

from models.dataset import Dataset
from utils.error_handler import InvalidInputError, get_logger
from utils.kernels import median_bandwidth

logger = get_logger(__name__)

RIDGE_JITTER = 1e-10
ZERO_VARIANCE_TOL = 1e-12
MIN_KERNEL_ROWS = 10


@dataclass(frozen=True)
class RegressionFit:
    method: str
    response: int
    predictors: Tuple[int, ...]
    fitted: np.ndarray
    residuals: np.ndarray
    hyperparameters: Dict[str, float] = field(default_factory=dict)


RegressionMethod = Callable[[Dataset, int, Sequence[int]], RegressionFit]


@dataclass(frozen=True)
class KernelOptions:
    """Cross-validation grid for kernel ridge regression"""

    multipliers: Tuple[float, ...] = (0.5, 1.0, 2.0)
    ridges: Tuple[float, ...] = tuple(np.logspace(-4, 0, 5))
    folds: int = 5
    seed: int = 0
    max_bandwidth_rows: int = 500


def _check_predictors(data: Dataset, response: int, predictors: Sequence[int]) -> Tuple[int, ...]:
    predictors = tuple(sorted(int(j) for j in predictors))
    if not 0 <= response < data.p:
        raise InvalidInputError(f"response {response} out of range for p={data.p}")
    if response in predictors:
        raise InvalidInputError(f"predictors {list(predictors)} contain the response {response}")
    if len(set(predictors)) != len(predictors) or any(not 0 <= j < data.p for j in predictors):
        raise InvalidInputError(f"invalid predictor set {list(predictors)} for p={data.p}")
    if data.n <= len(predictors) + 1:
        raise InvalidInputError(f"n={data.n} too small for {len(predictors)} predictors")
    return predictors


def _constant_fit(method: str, y: np.ndarray, response: int, predictors: Tuple[int, ...], **hyper) -> RegressionFit:
    fitted = np.full_like(y, y.mean())
    return RegressionFit(method, response, predictors, fitted, y - fitted, dict(hyper))


def fit_linear(data: Dataset, response: int, predictors: Sequence[int]) -> RegressionFit:
    """Ordinary least squares with intercept"""
    predictors = _check_predictors(data, response, predictors)
    y = data.column(response)
    if not predictors:
        return _constant_fit("linear", y, response, predictors)
    x = data.columns(predictors)
    design = np.column_stack([np.ones(data.n), x])
    hyper: Dict[str, float] = {}
    if np.linalg.matrix_rank(design) < design.shape[1]:
        logger.warning("rank-deficient design for node %d on %s, using ridge jitter", response, list(predictors))
        model = Ridge(alpha=RIDGE_JITTER).fit(x, y)
        hyper = {"rank_deficient": 1.0, "ridge": RIDGE_JITTER}
    else:
        model = LinearRegression().fit(x, y)
    fitted = model.predict(x)
    return RegressionFit("linear", response, predictors, fitted, y - fitted, hyper)


def fit_kernel(data: Dataset, response: int, predictors: Sequence[int], options: KernelOptions = KernelOptions()) -> RegressionFit:
    """
    Kernel ridge regression with an isotropic RBF kernel on standardized
    predictors. Bandwidth multiplier (times the median heuristic) and ridge
    are picked by seeded k-fold cross-validation on a fixed grid.
    """
    predictors = _check_predictors(data, response, predictors)
    y = data.column(response)
    x = data.columns(predictors)
    keep = x.std(axis=0) > ZERO_VARIANCE_TOL * np.maximum(1.0, np.abs(x.mean(axis=0)))
    dropped = len(predictors) - int(keep.sum())
    if dropped:
        logger.warning("node %d: dropped %d zero-variance predictor column(s)", response, dropped)
    hyper: Dict[str, float] = {"dropped_columns": float(dropped)} if dropped else {}
    if not keep.any() or np.ptp(y) == 0:
        return _constant_fit("kernel", y, response, predictors, **hyper)
    if data.n < MIN_KERNEL_ROWS:
        raise InvalidInputError(f"kernel regression needs n >= {MIN_KERNEL_ROWS}, got {data.n}")

    z = StandardScaler().fit_transform(x[:, keep])
    offset = y.mean()
    target = y - offset
    base = median_bandwidth(z, options.max_bandwidth_rows)
    grid = {
        "alpha": list(options.ridges),
        "gamma": [1.0 / (2.0 * (m * base) ** 2) for m in options.multipliers],
    }
    search = GridSearchCV(
        KernelRidge(kernel="rbf"),
        grid,
        cv=KFold(n_splits=min(options.folds, data.n), shuffle=True, random_state=options.seed),
        scoring="neg_mean_squared_error",
    )
    search.fit(z, target)
    fitted = search.best_estimator_.predict(z) + offset
    gamma = search.best_params_["gamma"]
    hyper.update(
        ridge=float(search.best_params_["alpha"]),
        bandwidth=float(np.sqrt(0.5 / gamma)),
        median_bandwidth=float(base),
    )
    return RegressionFit("kernel", response, predictors, fitted, y - fitted, hyper)


REGRESSION_METHODS = ("linear", "kernel")


def make_regression_method(name: str, options: KernelOptions = KernelOptions()) -> RegressionMethod:
    if name == "linear":
        return fit_linear
    if name == "kernel":
        return functools.partial(fit_kernel, options=options)
    raise InvalidInputError(f"unknown regression method {name!r}; choose from {REGRESSION_METHODS}")
