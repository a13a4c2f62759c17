"""
Dataset model: an n x p sample matrix with column names, read from and
written to CSV through pandas.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from utils.error_handler import DataFormatError, InvalidInputError


@dataclass(frozen=True)
class Dataset:
    values: np.ndarray
    names: Tuple[str, ...]

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise InvalidInputError(f"dataset must be a 2-D matrix, got shape {values.shape}")
        n, p = values.shape
        if n < 2 or p < 1:
            raise InvalidInputError(f"dataset needs n >= 2 rows and p >= 1 columns, got {n}x{p}")
        if not np.all(np.isfinite(values)):
            row, col = np.argwhere(~np.isfinite(values))[0]
            raise InvalidInputError(f"non-finite value at row {row}, column {col}")
        names = tuple(str(name) for name in self.names)
        if len(names) != p:
            raise InvalidInputError(f"{len(names)} names for {p} columns")
        if len(set(names)) != p:
            raise InvalidInputError(f"column names must be unique: {names}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", names)

    @classmethod
    def from_array(cls, values, names: Optional[Sequence[str]] = None) -> "Dataset":
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if names is None:
            names = [f"X{j}" for j in range(values.shape[1])]
        return cls(values, tuple(names))

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "Dataset":
        """Read a header-plus-rows CSV; bad cells are reported by row and column"""
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Data file not found: {path}")
        try:
            frame = pd.read_csv(path, dtype=str, keep_default_na=False)
        except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
            raise DataFormatError(f"{path}: {exc}") from exc
        numeric = frame.apply(pd.to_numeric, errors="coerce")
        bad = numeric.isna().to_numpy() | ~np.isfinite(numeric.to_numpy(dtype=float))
        if bad.any():
            row, col = np.argwhere(bad)[0]
            raise DataFormatError(
                f"{path} row {row + 2}, column {frame.columns[col]!r}: "
                f"cannot parse {frame.iat[row, col]!r} as a finite number"
            )
        return cls(numeric.to_numpy(dtype=float), tuple(frame.columns))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def column(self, j: int) -> np.ndarray:
        return self.values[:, j]

    def columns(self, indices: Sequence[int]) -> np.ndarray:
        return self.values[:, list(indices)]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.values, columns=list(self.names))

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        return path

    def subsample(self, max_rows: int, seed: int = 0) -> "Dataset":
        """At most ``max_rows`` rows drawn without replacement, original order kept"""
        if self.n <= max_rows:
            return self
        rows = np.sort(np.random.default_rng(seed).choice(self.n, size=max_rows, replace=False))
        return Dataset(self.values[rows], self.names)
