"""
Structural equation model descriptions: one mechanism and one noise law per
node, plus the simulation config. A SemSpec can be written as a key=value
sidecar next to the data it generated.
"""

from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Tuple, Union

import numpy as np

from models.graphs import Dag
from utils.error_handler import InvalidInputError

REGIMES = ("linear_nongauss", "nonlinear_gauss")


# Mechanisms


@dataclass(frozen=True)
class LinearMechanism:
    """Sum of coefficient * parent value"""

    coefficients: Tuple[Tuple[int, float], ...] = ()

    @property
    def parents(self) -> Tuple[int, ...]:
        return tuple(parent for parent, _ in self.coefficients)

    def evaluate(self, values: np.ndarray) -> np.ndarray:
        out = np.zeros(values.shape[0])
        for parent, beta in self.coefficients:
            out += beta * values[:, parent]
        return out


@dataclass(frozen=True, eq=False)
class TabulatedMechanism:
    """
    Sample-path values of a random function at the observed parent inputs.

    With ``additive`` set, ``values`` holds one column per parent and the
    mechanism is their sum; otherwise a single column of a joint function.
    Off-table inputs are linearly interpolated per parent (additive) or
    mapped to the nearest tabulated input (joint).
    """

    parents: Tuple[int, ...]
    inputs: np.ndarray
    values: np.ndarray
    additive: bool = True

    def total(self) -> np.ndarray:
        return self.values.sum(axis=1)

    def evaluate(self, data: np.ndarray) -> np.ndarray:
        if not self.parents:
            return np.zeros(data.shape[0])
        if self.additive:
            out = np.zeros(data.shape[0])
            for col, parent in enumerate(self.parents):
                order = np.argsort(self.inputs[:, col], kind="stable")
                out += np.interp(data[:, parent], self.inputs[order, col], self.values[order, col])
            return out
        query = data[:, list(self.parents)]
        dists = ((query[:, None, :] - self.inputs[None, :, :]) ** 2).sum(axis=2)
        return self.values[dists.argmin(axis=1), 0]


@dataclass(frozen=True, eq=False)
class DiscreteCpt:
    """P(X = 1 | parents) for a binary node; axis k of ``table`` indexes ``parents[k]``"""

    parents: Tuple[int, ...]
    table: np.ndarray


Mechanism = Union[LinearMechanism, TabulatedMechanism, DiscreteCpt]


# Noise laws


@dataclass(frozen=True)
class ScaledPowerGaussian:
    """K * sign(M) * |M|^alpha with M standard normal"""

    scale: float
    exponent: float

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        m = rng.standard_normal(n)
        return self.scale * np.sign(m) * np.abs(m) ** self.exponent


@dataclass(frozen=True)
class GaussianNoise:
    variance: float

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.normal(0.0, np.sqrt(self.variance), size=n)


@dataclass(frozen=True)
class BernoulliTable:
    """Noise of a binary node; its success probabilities sit in the node's CPT"""


Noise = Union[ScaledPowerGaussian, GaussianNoise, BernoulliTable]


@dataclass(frozen=True, eq=False)
class SemSpec:
    graph: Dag
    mechanisms: Tuple[Mechanism, ...]
    noises: Tuple[Noise, ...]
    regime: str = ""
    noise_draws: Optional[np.ndarray] = None

    def __post_init__(self):
        if len(self.mechanisms) != self.graph.p or len(self.noises) != self.graph.p:
            raise InvalidInputError("one mechanism and one noise per node required")
        for j, mechanism in enumerate(self.mechanisms):
            if set(mechanism.parents) != set(self.graph.parents(j)):
                raise InvalidInputError(
                    f"node {j}: mechanism parents {sorted(mechanism.parents)} "
                    f"differ from graph parents {sorted(self.graph.parents(j))}"
                )


@dataclass(frozen=True)
class SimConfig:
    p: int
    n: int
    regime: str = "linear_nongauss"
    seed: int = 0
    edge_prob: Optional[float] = None
    noise_variance_range: Tuple[float, float] = (0.1, 0.5)
    additive: bool = True
    standardize_inputs: bool = False

    def __post_init__(self):
        if self.p < 1 or self.n < 1:
            raise InvalidInputError(f"p and n must be >= 1, got p={self.p}, n={self.n}")
        if self.regime not in REGIMES:
            raise InvalidInputError(f"unknown regime {self.regime!r}; choose from {REGIMES}")
        if self.edge_prob is not None and not 0.0 <= self.edge_prob <= 1.0:
            raise InvalidInputError(f"edge_prob must lie in [0, 1], got {self.edge_prob}")
        low, high = self.noise_variance_range
        if not 0 < low <= high:
            raise InvalidInputError(f"invalid noise variance range {self.noise_variance_range}")


def _join(values: np.ndarray) -> str:
    return ",".join(f"{v:.17g}" for v in np.ravel(values))


def sem_to_keyvalue(spec: SemSpec) -> Dict[str, object]:
    """
    Flatten a SemSpec into sidecar entries. Keys are ``node.<j>.<field>``;
    tabulated inputs and values are comma-separated in row-major order.
    Sampled noise columns are written as ``node.<j>.noise.draws`` so the
    data can be rebuilt from the sidecar alone.
    """
    entries: Dict[str, object] = {
        "regime": spec.regime,
        "p": spec.graph.p,
        "edges": ";".join(f"{i}->{j}" for i, j in spec.graph.sorted_edges()),
    }
    for j, (mechanism, noise) in enumerate(zip(spec.mechanisms, spec.noises)):
        prefix = f"node.{j}"
        entries[f"{prefix}.parents"] = list(mechanism.parents)
        if isinstance(mechanism, LinearMechanism):
            entries[f"{prefix}.mechanism"] = "linear"
            entries[f"{prefix}.coefficients"] = [float(beta) for _, beta in mechanism.coefficients]
        elif isinstance(mechanism, TabulatedMechanism):
            entries[f"{prefix}.mechanism"] = "tabulated-additive" if mechanism.additive else "tabulated-joint"
            entries[f"{prefix}.interpolation"] = "linear" if mechanism.additive else "nearest"
            entries[f"{prefix}.inputs"] = _join(mechanism.inputs)
            entries[f"{prefix}.values"] = _join(mechanism.values)
        else:
            entries[f"{prefix}.mechanism"] = "discrete-cpt"
            entries[f"{prefix}.table"] = _join(mechanism.table)
        entries.update(_noise_entries(prefix, noise))
        if spec.noise_draws is not None:
            entries[f"{prefix}.noise.draws"] = _join(spec.noise_draws[:, j])
    return entries


def _noise_entries(prefix: str, noise: Noise) -> Mapping[str, object]:
    if isinstance(noise, ScaledPowerGaussian):
        return {f"{prefix}.noise": "scaled-power-gaussian", f"{prefix}.noise.scale": float(noise.scale),
                f"{prefix}.noise.exponent": float(noise.exponent)}
    if isinstance(noise, GaussianNoise):
        return {f"{prefix}.noise": "gaussian", f"{prefix}.noise.variance": float(noise.variance)}
    return {f"{prefix}.noise": "bernoulli-table"}
