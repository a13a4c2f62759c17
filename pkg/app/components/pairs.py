"""
Cause-effect pairs benchmark: load a pair directory, infer each pair's
direction, rank pairs by confidence and sweep the weighted accuracy against
the weighted decision rate.

Directory layout: ``pairmeta.txt`` with whitespace-separated rows
``id cause_first cause_last effect_first effect_last weight`` (1-based
column ranges) and one ``pair<id>.txt`` sample file per pair.
"""

import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.stats import beta

from components.discovery import DirectionVerdict, infer_direction
from components.independence import IndependenceTest
from components.regression import RegressionMethod
from components.simulation import replicate_seed
from models.dataset import Dataset
from utils.error_handler import DataFormatError, InvalidInputError, get_logger
from utils.parallel import parallel_map

logger = get_logger(__name__)

METADATA_FILE = "pairmeta.txt"
PAIR_N_CAP = 2000
CURVE_COLUMNS = ("decision_rate", "accuracy", "ci68_low", "ci68_high", "ci95_low", "ci95_high")


@dataclass(frozen=True, eq=False)
class PairRecord:
    id: str
    x: np.ndarray
    y: np.ndarray
    weight: float
    truth: str
    skipped: bool = False


@dataclass(frozen=True)
class RankedPair:
    id: str
    weight: float
    verdict: DirectionVerdict
    correct: bool


@dataclass(frozen=True)
class CurvePoint:
    decision_rate: float
    accuracy: float
    ci68_low: float
    ci68_high: float
    ci95_low: float
    ci95_high: float


@dataclass(frozen=True)
class AccuracyCurve:
    points: Tuple[CurvePoint, ...]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([vars(point) for point in self.points], columns=list(CURVE_COLUMNS))

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        return path


def _read_metadata(path: Path) -> List[Tuple[str, int, int, int, int, float]]:
    rows = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 6:
            raise DataFormatError(f"{path} row {lineno}: expected 6 fields, got {len(fields)}")
        try:
            ranges = [int(v) for v in fields[1:5]]
            weight = float(fields[5])
        except ValueError:
            raise DataFormatError(f"{path} row {lineno}: non-numeric column range or weight") from None
        cause_first, cause_last, effect_first, effect_last = ranges
        if min(ranges) < 1 or cause_last < cause_first or effect_last < effect_first:
            raise DataFormatError(f"{path} row {lineno}: invalid column ranges {ranges}")
        if not 0.0 < weight <= 1.0:
            raise DataFormatError(f"{path} row {lineno}: weight must lie in (0, 1], got {weight}")
        rows.append((fields[0], cause_first, cause_last, effect_first, effect_last, weight))
    return rows


def load_pairs(directory: Union[str, Path]) -> List[PairRecord]:
    directory = Path(directory)
    meta = directory / METADATA_FILE
    if not meta.exists():
        raise FileNotFoundError(f"Metadata file not found: {meta}")
    records = []
    for pair_id, cause_first, cause_last, effect_first, effect_last, weight in _read_metadata(meta):
        truth = "x_causes_y" if cause_first < effect_first else "y_causes_x"
        if cause_last > cause_first or effect_last > effect_first:
            logger.info("pair %s: multivariate, skipped", pair_id)
            records.append(PairRecord(pair_id, np.zeros(0), np.zeros(0), weight, truth, skipped=True))
            continue
        sample = directory / f"pair{pair_id}.txt"
        if not sample.exists():
            raise DataFormatError(f"sample file for pair {pair_id} not found: {sample}")
        try:
            values = pd.read_csv(sample, sep=r"\s+", header=None, dtype=float).to_numpy()
        except (ValueError, pd.errors.ParserError) as exc:
            raise DataFormatError(f"pair {pair_id}: cannot parse {sample}: {exc}") from exc
        needed = max(cause_first, effect_first)
        if values.shape[1] < needed:
            raise DataFormatError(f"pair {pair_id}: {values.shape[1]} columns, metadata needs {needed}")
        first, second = sorted((cause_first, effect_first))
        records.append(PairRecord(pair_id, values[:, first - 1], values[:, second - 1], weight, truth))
    return records


def clopper_pearson(successes: int, trials: int, level: float) -> Tuple[float, float]:
    """Exact binomial interval for ``successes`` out of ``trials``"""
    tail = (1.0 - level) / 2.0
    low = 0.0 if successes == 0 else float(beta.ppf(tail, successes, trials - successes + 1))
    high = 1.0 if successes == trials else float(beta.ppf(1.0 - tail, successes + 1, trials - successes))
    return low, high


def _cap_rows(record: PairRecord, n_cap: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    if record.x.size <= n_cap:
        return record.x, record.y
    pair = Dataset(np.column_stack([record.x, record.y]), ("x", "y"))
    capped = pair.subsample(n_cap, replicate_seed(seed, zlib.crc32(record.id.encode())))
    return capped.column(0), capped.column(1)


def _judge(task) -> DirectionVerdict:
    x, y, rm, test = task
    return infer_direction(x, y, rm, test)


def rank_pairs(
    records: Sequence[PairRecord],
    rm: RegressionMethod,
    test: Optional[IndependenceTest] = None,
    n_cap: int = PAIR_N_CAP,
    seed: int = 0,
    workers: int = 1,
) -> List[RankedPair]:
    """Infer every non-skipped pair and sort by rank key descending, ties by id"""
    active = [r for r in records if not r.skipped]
    if not active:
        raise InvalidInputError("no non-skipped pairs to rank")
    tasks = [(*_cap_rows(r, n_cap, seed), rm, test) for r in active]
    verdicts = parallel_map(_judge, tasks, workers=workers, description="pairs")
    ranked = [
        RankedPair(r.id, r.weight, v, v.decision == r.truth) for r, v in zip(active, verdicts)
    ]
    return sorted(ranked, key=lambda item: (-item.verdict.rank_key, item.id))


def accuracy_curve(ranked: Sequence[RankedPair]) -> AccuracyCurve:
    """
    Weighted accuracy against decision rate over growing prefixes of the
    ranking. One point per tie group of rank keys; undecided pairs count as
    wrong decisions.
    """
    if not ranked:
        raise InvalidInputError("accuracy curve needs at least one ranked pair")
    total = sum(item.weight for item in ranked)
    points = []
    decided = correct = 0.0
    for k, item in enumerate(ranked):
        decided += item.weight
        correct += item.weight if item.correct else 0.0
        if k + 1 < len(ranked) and ranked[k + 1].verdict.rank_key == item.verdict.rank_key:
            continue
        trials = max(1, int(round(decided)))
        successes = min(trials, int(round(correct)))
        ci68 = clopper_pearson(successes, trials, 0.68)
        ci95 = clopper_pearson(successes, trials, 0.95)
        points.append(CurvePoint(decided / total, correct / decided, *ci68, *ci95))
    return AccuracyCurve(tuple(points))


def rank_and_curve(
    records: Sequence[PairRecord],
    rm: RegressionMethod,
    test: Optional[IndependenceTest] = None,
    n_cap: int = PAIR_N_CAP,
    seed: int = 0,
    workers: int = 1,
) -> AccuracyCurve:
    return accuracy_curve(rank_pairs(records, rm, test, n_cap, seed, workers))
