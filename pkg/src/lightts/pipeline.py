"""Dataset ingestion, chronological splitting, scaling, window construction.

Input files are UTF-8 comma-separated CSV with a header row; a leading
column named `date` is dropped. Rows are ascending in time. Splits are
contiguous and chronological (train first), the scaler is fitted on the
training rows only, and windows are built with stride 1 strictly inside
one split so no target ever leaks into an input.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .model import MULTI_STEP, SINGLE_STEP


@dataclass(frozen=True)
class Dataset:
    names: tuple          # column names, date column excluded
    values: np.ndarray    # (M, N), time-major
    granularity: str = ""

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_series(self) -> int:
        return self.values.shape[1]


def load_csv(path) -> Dataset:
    """Parse a numeric CSV; every cell must be a finite real."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        drop_first = len(header) > 0 and header[0].lower() == "date"
        names = header[1:] if drop_first else header
        if not names:
            raise DataError(f"{path}: no numeric columns in header {header}")

        rows = []
        for ridx, row in enumerate(reader, start=2):  # 1-based, after header
            if not row:
                continue
            cells = row[1:] if drop_first else row
            if len(cells) != len(names):
                raise DataError(
                    f"{path}: row {ridx} has {len(cells)} values, expected {len(names)}"
                )
            parsed = []
            for cidx, cell in enumerate(cells):
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: row {ridx}, column {names[cidx]!r}: "
                        f"cannot parse {cell!r} as a real number"
                    ) from None
                if not np.isfinite(v):
                    raise DataError(
                        f"{path}: row {ridx}, column {names[cidx]!r}: "
                        f"non-finite value {cell!r}"
                    )
                parsed.append(v)
            rows.append(parsed)

    if not rows:
        raise DataError(f"{path}: no data rows")
    return Dataset(names=tuple(names), values=np.array(rows, dtype=np.float64))


@dataclass(frozen=True)
class SplitSpec:
    ratios: tuple  # (train, val, test), positive, summing to 1
    scheme: str

    def __post_init__(self):
        if len(self.ratios) != 3 or any(r <= 0 for r in self.ratios):
            raise ConfigError(f"split ratios must be 3 positive reals, got {self.ratios}")
        if abs(sum(self.ratios) - 1.0) > 1e-9:
            raise ConfigError(f"split ratios must sum to 1, got {self.ratios}")

    @classmethod
    def r622(cls) -> "SplitSpec":
        return cls((0.6, 0.2, 0.2), "r622")

    @classmethod
    def r712(cls) -> "SplitSpec":
        return cls((0.7, 0.1, 0.2), "r712")

    @classmethod
    def from_name(cls, name: str) -> "SplitSpec":
        try:
            return {"r622": cls.r622, "r712": cls.r712}[name]()
        except KeyError:
            raise ConfigError(f"unknown split scheme {name!r}; use r622 or r712") from None


def split(ds: Dataset, spec: SplitSpec, min_len: int = 0):
    """Contiguous (train, val, test) row ranges: floor(M*r_train),
    floor(M*r_val), remainder. Each range must hold at least `min_len` rows."""
    M = ds.n_rows
    n_train = int(M * spec.ratios[0])
    n_val = int(M * spec.ratios[1])
    n_test = M - n_train - n_val
    ranges = (range(0, n_train), range(n_train, n_train + n_val), range(n_train + n_val, M))
    for name, r in zip(("train", "val", "test"), ranges):
        if len(r) < max(min_len, 1):
            raise DataError(
                f"{name} split has {len(r)} rows, needs at least {max(min_len, 1)} "
                f"(M={M}, scheme={spec.scheme})"
            )
    return ranges


@dataclass(frozen=True)
class Scaler:
    mean: np.ndarray  # (N,)
    std: np.ndarray   # (N,), floored at 1e-8

    STD_FLOOR = 1e-8


def fit_scaler(ds: Dataset, train_range: range) -> Scaler:
    """Per-column mean and population std over the training rows only."""
    if len(train_range) == 0:
        raise DataError("cannot fit a scaler on an empty training range")
    block = ds.values[train_range.start:train_range.stop]
    mean = block.mean(axis=0)
    std = np.maximum(block.std(axis=0), Scaler.STD_FLOOR)
    return Scaler(mean=mean, std=std)


def apply_scaler(ds: Dataset, s: Scaler) -> Dataset:
    return Dataset(ds.names, (ds.values - s.mean) / s.std, ds.granularity)


def invert_scaler(values: np.ndarray, s: Scaler) -> np.ndarray:
    """Undo standardization on anything whose last axis runs over series."""
    return values * s.std + s.mean


@dataclass(frozen=True)
class WindowBatch:
    inputs: np.ndarray   # (K, N, T)
    targets: np.ndarray  # (K, L', N)
    origins: np.ndarray  # (K,) absolute index of each window's last input row
    mode: str

    def __len__(self) -> int:
        return self.inputs.shape[0]


def make_windows(ds: Dataset, rows: range, T: int, L: int, mode: str) -> WindowBatch:
    """Stride-1 windows inside `rows`: input = x[t-T+1 .. t] (transposed to
    N x T), target = x[t+1 .. t+L] (multi_step) or x[t+L] (single_step)."""
    if mode not in (MULTI_STEP, SINGLE_STEP):
        raise ConfigError(f"unknown mode {mode!r}")
    span = len(rows)
    count = span - T - L + 1
    if count < 1:
        raise DataError(
            f"range of {span} rows cannot hold any window with T={T}, L={L} "
            f"(needs at least {T + L})"
        )
    vals = ds.values
    inputs = np.empty((count, ds.n_series, T))
    out_steps = L if mode == MULTI_STEP else 1
    targets = np.empty((count, out_steps, ds.n_series))
    origins = np.empty(count, dtype=np.int64)
    for k in range(count):
        t = rows.start + T - 1 + k  # last input row
        inputs[k] = vals[t - T + 1:t + 1].T
        if mode == MULTI_STEP:
            targets[k] = vals[t + 1:t + L + 1]
        else:
            targets[k] = vals[t + L:t + L + 1]
        origins[k] = t
    return WindowBatch(inputs, targets, origins, mode)
