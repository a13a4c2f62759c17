"""
Numerical evaluator for the third-order differential condition on
(f, xi = log p_X, nu = log p_N) under which a bivariate additive noise model
Y = f(X) + N admits a backward model.

``condition1_residual`` evaluates

    r(x, y) = xi'''(x) - [ xi''(x) * (-nu''' f'/nu'' + f''/f')
                           - 2 nu'' f'' f' + nu' f''' + nu' nu''' f'' f'/nu''
                           - nu' (f'')^2 / f' ]

with the nu terms at y - f(x) and the xi, f terms at x. The model is
non-identifiable only where r vanishes identically.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Mapping, Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from scipy.integrate import cumulative_trapezoid

from utils.config import get_float, get_float_list, get_str
from utils.error_handler import InvalidInputError, get_logger

logger = get_logger(__name__)

ScalarFn = Callable[[np.ndarray], np.ndarray]

ADMISSIBLE_TOL = 1e-12
DEFAULT_STEP = 1e-4
DERIVATIVE_KEYS = ("f1", "f2", "f3", "xi2", "xi3", "nu1", "nu2", "nu3")
CDF_POINTS = 4001


@dataclass(frozen=True)
class Family:
    """A scalar function with analytic first three derivatives"""

    name: str
    value: ScalarFn
    d1: ScalarFn
    d2: ScalarFn
    d3: ScalarFn


def gaussian_log_density(mean: float = 0.0, sd: float = 1.0) -> Family:
    """Unnormalized log N(mean, sd^2)"""
    if sd <= 0:
        raise InvalidInputError(f"gaussian sd must be > 0, got {sd}")
    precision = 1.0 / sd ** 2
    return Family(
        "gaussian",
        lambda t: -0.5 * precision * (np.asarray(t, float) - mean) ** 2,
        lambda t: -precision * (np.asarray(t, float) - mean),
        lambda t: np.full_like(np.asarray(t, float), -precision),
        lambda t: np.zeros_like(np.asarray(t, float)),
    )


def log_mix_lin_exp(c1: float, c2: float, c3: float, c4: float = 0.0) -> Family:
    """c1 exp(c2 t) + c3 t + c4, a log-density when c1 < 0 and c2 c3 > 0"""
    return Family(
        "log-mix-lin-exp",
        lambda t: c1 * np.exp(c2 * np.asarray(t, float)) + c3 * np.asarray(t, float) + c4,
        lambda t: c1 * c2 * np.exp(c2 * np.asarray(t, float)) + c3,
        lambda t: c1 * c2 ** 2 * np.exp(c2 * np.asarray(t, float)),
        lambda t: c1 * c2 ** 3 * np.exp(c2 * np.asarray(t, float)),
    )


def polynomial(coefficients: Sequence[float]) -> Family:
    """Polynomial with coefficients in increasing degree"""
    poly = Polynomial(list(coefficients))
    return Family("polynomial", poly, poly.deriv(1), poly.deriv(2), poly.deriv(3))


@dataclass(frozen=True)
class AnmTriple:
    """
    Function f and unnormalized log-densities xi (input) and nu (noise).

    ``derivative_mode`` is ``analytic`` (all of DERIVATIVE_KEYS supplied) or
    ``central-difference``, which differentiates the base functions with
    steps ``step``, ``10 step`` and ``100 step`` for orders one to three.
    """

    f: ScalarFn
    xi: ScalarFn
    nu: ScalarFn
    derivatives: Mapping[str, ScalarFn] = field(default_factory=dict)
    derivative_mode: str = "analytic"
    step: float = DEFAULT_STEP
    x_bracket: Tuple[float, float] = (-40.0, 40.0)
    noise_bracket: Tuple[float, float] = (-40.0, 40.0)
    name: str = "triple"

    def __post_init__(self):
        if self.derivative_mode not in ("analytic", "central-difference"):
            raise InvalidInputError(f"unknown derivative mode {self.derivative_mode!r}")
        missing = [k for k in DERIVATIVE_KEYS if k not in self.derivatives]
        if self.derivative_mode == "analytic" and missing:
            raise InvalidInputError(f"analytic mode needs derivatives {missing}")

    @classmethod
    def from_families(cls, f: Family, xi: Family, nu: Family, **kwargs) -> "AnmTriple":
        derivatives = {
            "f1": f.d1, "f2": f.d2, "f3": f.d3,
            "xi2": xi.d2, "xi3": xi.d3,
            "nu1": nu.d1, "nu2": nu.d2, "nu3": nu.d3,
        }
        kwargs.setdefault("name", f"{f.name}/{xi.name}/{nu.name}")
        return cls(f.value, xi.value, nu.value, derivatives, **kwargs)

    def with_mode(self, mode: str) -> "AnmTriple":
        return AnmTriple(self.f, self.xi, self.nu, self.derivatives, mode, self.step,
                         self.x_bracket, self.noise_bracket, self.name)

    def derivative(self, key: str, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if self.derivative_mode == "analytic":
            return np.asarray(self.derivatives[key](points), dtype=float) * np.ones_like(points)
        base = {"f": self.f, "xi": self.xi, "nu": self.nu}[key.rstrip("123")]
        return central_difference(base, points, int(key[-1]), self.step)


def central_difference(func: ScalarFn, points: np.ndarray, order: int, step: float = DEFAULT_STEP) -> np.ndarray:
    h = step * 10.0 ** (order - 1)
    t = np.asarray(points, dtype=float)
    if order == 1:
        return (func(t + h) - func(t - h)) / (2 * h)
    if order == 2:
        return (func(t + h) - 2 * func(t) + func(t - h)) / h ** 2
    if order == 3:
        return (func(t + 2 * h) - 2 * func(t + h) + 2 * func(t - h) - func(t - 2 * h)) / (2 * h ** 3)
    raise InvalidInputError(f"derivative order must be 1..3, got {order}")


@dataclass(frozen=True, eq=False)
class ResidualField:
    """Per-point residuals; inadmissible points carry NaN and admissible=False"""

    points: np.ndarray
    residuals: np.ndarray
    scale: np.ndarray
    admissible: np.ndarray

    @property
    def skipped(self) -> int:
        return int((~self.admissible).sum())

    def max_abs(self) -> float:
        values = np.abs(self.residuals[self.admissible])
        return float(values.max()) if values.size else 0.0


def condition1_residual(t: AnmTriple, grid: np.ndarray) -> ResidualField:
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    x, y = grid[:, 0], grid[:, 1]
    noise = y - np.asarray(t.f(x), dtype=float)
    f1, f2, f3 = (t.derivative(k, x) for k in ("f1", "f2", "f3"))
    xi2, xi3 = t.derivative("xi2", x), t.derivative("xi3", x)
    nu1, nu2, nu3 = (t.derivative(k, noise) for k in ("nu1", "nu2", "nu3"))

    admissible = (np.abs(nu2 * f1) > ADMISSIBLE_TOL) & (np.abs(f1) > ADMISSIBLE_TOL)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        terms = (
            xi2 * (-nu3 * f1 / nu2),
            xi2 * (f2 / f1),
            -2.0 * nu2 * f2 * f1,
            nu1 * f3,
            nu1 * nu3 * f2 * f1 / nu2,
            -nu1 * f2 ** 2 / f1,
        )
        residuals = xi3 - sum(terms)
        scale = np.abs(xi3) + sum(np.abs(term) for term in terms)
    residuals = np.where(admissible, residuals, np.nan)
    if (~admissible).any():
        logger.debug("condition residual: %d inadmissible points skipped", int((~admissible).sum()))
    return ResidualField(grid, residuals, np.where(admissible, scale, np.nan), admissible)


def check_derivatives(t: AnmTriple, x: np.ndarray, noise: np.ndarray, rtol: float = 1e-4) -> Dict[str, float]:
    """Largest relative gap between analytic and central-difference derivatives"""
    analytic, numeric = t.with_mode("analytic"), t.with_mode("central-difference")
    gaps = {}
    for key in DERIVATIVE_KEYS:
        points = noise if key.startswith("nu") else x
        a, c = analytic.derivative(key, points), numeric.derivative(key, points)
        gaps[key] = float(np.max(np.abs(a - c) / np.maximum(1.0, np.abs(a))))
    failing = {k: v for k, v in gaps.items() if v > rtol}
    if failing:
        raise InvalidInputError(f"analytic derivatives disagree with finite differences: {failing}")
    return gaps


# Grids and sampling from a triple


def _density_table(log_density: ScalarFn, bracket: Tuple[float, float]) -> Tuple[np.ndarray, np.ndarray]:
    t = np.linspace(bracket[0], bracket[1], CDF_POINTS)
    with np.errstate(over="ignore", invalid="ignore"):
        log_p = np.asarray(log_density(t), dtype=float)
    log_p = np.where(np.isfinite(log_p), log_p, -np.inf)
    weights = np.exp(log_p - log_p.max())
    cdf = cumulative_trapezoid(weights, t, initial=0.0)
    return t, cdf / cdf[-1]


def quantiles(log_density: ScalarFn, bracket: Tuple[float, float], probs) -> np.ndarray:
    t, cdf = _density_table(log_density, bracket)
    return np.interp(probs, cdf, t)


def make_grid(x_range: Tuple[float, float], y_range: Tuple[float, float], size: int = 21) -> np.ndarray:
    xs = np.linspace(*x_range, size)
    ys = np.linspace(*y_range, size)
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([xx.ravel(), yy.ravel()])


def default_grid(t: AnmTriple, size: int = 21, mass: float = 0.95) -> np.ndarray:
    """
    Uniform size x size grid over the central ``mass`` region: x between its
    central quantiles, y covering f over that range plus the central noise range.
    """
    tail = (1.0 - mass) / 2
    x_lo, x_hi = quantiles(t.xi, t.x_bracket, [tail, 1 - tail])
    n_lo, n_hi = quantiles(t.nu, t.noise_bracket, [tail, 1 - tail])
    fx = np.asarray(t.f(np.linspace(x_lo, x_hi, 201)), dtype=float)
    return make_grid((x_lo, x_hi), (fx.min() + n_lo, fx.max() + n_hi), size)


def sample_triple(t: AnmTriple, n: int, seed: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """Draw (x, y) with x ~ exp(xi), noise ~ exp(nu) by numerical inverse CDF"""
    rng = np.random.default_rng(seed)
    tx, cdf_x = _density_table(t.xi, t.x_bracket)
    tn, cdf_n = _density_table(t.nu, t.noise_bracket)
    x = np.interp(rng.uniform(size=n), cdf_x, tx)
    noise = np.interp(rng.uniform(size=n), cdf_n, tn)
    return x, np.asarray(t.f(x), dtype=float) + noise


# Named triples


def linear_gaussian_triple(a: float = 1.0, b: float = 0.0, x_sd: float = 1.0, noise_sd: float = 1.0) -> AnmTriple:
    return AnmTriple.from_families(
        polynomial([b, a]), gaussian_log_density(0.0, x_sd), gaussian_log_density(0.0, noise_sd),
        x_bracket=(-12 * x_sd, 12 * x_sd), noise_bracket=(-12 * noise_sd, 12 * noise_sd),
    )


def polynomial_gaussian_triple(coefficients: Sequence[float], x_sd: float = 1.0, noise_sd: float = 1.0) -> AnmTriple:
    return AnmTriple.from_families(
        polynomial(coefficients), gaussian_log_density(0.0, x_sd), gaussian_log_density(0.0, noise_sd),
        x_bracket=(-12 * x_sd, 12 * x_sd), noise_bracket=(-12 * noise_sd, 12 * noise_sd),
    )


def log_mix_lin_exp_triple(a: float, b: float, c: Sequence[float], gamma: Sequence[float]) -> AnmTriple:
    """Linear f(x) = a x + b with log-mix-lin-exp input (c) and noise (gamma) log-densities"""
    return AnmTriple.from_families(polynomial([b, a]), log_mix_lin_exp(*c), log_mix_lin_exp(*gamma))


@dataclass(frozen=True)
class Example7Check:
    holds: bool
    diagnostics: Dict[str, float]


def verify_example7_constraint(a: float, b: float, c: Sequence[float], gamma: Sequence[float], tol: float = 1e-12) -> Example7Check:
    """
    For linear f with log-mix-lin-exp input and noise, a backward additive
    noise model exists iff c2 = -a gamma2 and c3 != a gamma3. Diagnostics
    carry the backward noise parameters (delta) and the generalized-mixture
    parameters (d1..d6) of the backward input density, with the free
    normalization constants set to zero.
    """
    c1, c2, c3, c4 = (float(v) for v in c)
    g1, g2, g3, g4 = (float(v) for v in gamma)
    violations = []
    if not c1 < 0:
        violations.append(f"c1 < 0 (c1={c1})")
    if not c2 * c3 > 0:
        violations.append(f"c2*c3 > 0 (c2*c3={c2 * c3})")
    if not g1 < 0:
        violations.append(f"gamma1 < 0 (gamma1={g1})")
    if not g2 * g3 > 0:
        violations.append(f"gamma2*gamma3 > 0 (gamma2*gamma3={g2 * g3})")
    if a == 0:
        violations.append("a != 0 (a=0)")
    if violations:
        raise InvalidInputError("log-mix-lin-exp family constraints violated: " + "; ".join(violations))

    matched = abs(c2 + a * g2) <= tol
    distinct = c3 != a * g3
    d = {
        "d1": g3,
        "d2": -(c3 - a * g3) / c2,
        "d3": -c1,
        "d4": -g1 * math.exp(-g2 * b),
        "d5": g2,
        "d6": c4 - g3 * b + g4,
    }
    mixture_ok = d["d4"] > 0 and d["d3"] > 0 and d["d1"] * d["d5"] > 0 and d["d2"] < -d["d1"] / d["d5"]
    diagnostics: Dict[str, float] = {
        "c2_plus_a_gamma2": c2 + a * g2,
        "c3_equals_a_gamma3": float(not distinct),
        "delta1": -1.0,
        "delta2": c2,
        "delta3": c3 - g3 * a,
        "delta4": 0.0,
        "generalized_mixture_ok": float(mixture_ok),
        **d,
    }
    return Example7Check(matched and distinct, diagnostics)


# Triple spec files


def triple_from_keyvalue(entries: Mapping[str, str]) -> AnmTriple:
    """
    Build a triple from spec entries::

        f=polynomial            f.coefficients=0,1     (increasing degree)
        xi=gaussian             xi.mean=0   xi.sd=1
        nu=log-mix-lin-exp      nu.params=-1,-1,-0.5,0
        derivatives=analytic    step=1e-4
    """
    f = polynomial(get_float_list(entries, "f.coefficients", (0.0, 1.0)))
    if get_str(entries, "f", "polynomial") != "polynomial":
        raise InvalidInputError("f must be 'polynomial'")
    families, brackets = [], []
    for key in ("xi", "nu"):
        family = get_str(entries, key, "gaussian")
        if family == "gaussian":
            mean, sd = get_float(entries, f"{key}.mean", 0.0), get_float(entries, f"{key}.sd", 1.0)
            families.append(gaussian_log_density(mean, sd))
            brackets.append((mean - 12 * sd, mean + 12 * sd))
        elif family == "log-mix-lin-exp":
            params = get_float_list(entries, f"{key}.params", (-1.0, 1.0, 0.5, 0.0))
            if len(params) != 4:
                raise InvalidInputError(f"{key}.params needs four values")
            families.append(log_mix_lin_exp(*params))
            brackets.append((-40.0, 40.0))
        else:
            raise InvalidInputError(f"unknown family {family!r} for {key}; use gaussian or log-mix-lin-exp")
    return AnmTriple.from_families(
        f, families[0], families[1],
        derivative_mode=get_str(entries, "derivatives", "analytic"),
        step=get_float(entries, "step", DEFAULT_STEP),
        x_bracket=brackets[0],
        noise_bracket=brackets[1],
    )
