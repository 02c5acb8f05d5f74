"""Forecast quality metrics, the naive floor baseline, seed aggregation.

MSE/MAE pool over every (window, horizon step, variable) triple of the
test split. RSE normalizes the pooled squared error by the spread around
the grand mean. CORR averages the per-variable Pearson correlation taken
across test time; variables with zero temporal variance on either side
are skipped (and counted), not scored as zero.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, ShapeError
from .model import MULTI_STEP, SINGLE_STEP


def _paired(Y, Yhat):
    Y = np.asarray(Y, dtype=np.float64)
    Yhat = np.asarray(Yhat, dtype=np.float64)
    if Y.shape != Yhat.shape:
        raise ShapeError(f"metric operands differ in shape: {Y.shape} vs {Yhat.shape}")
    if Y.size == 0:
        raise DataError("metric over an empty test set")
    return Y, Yhat


def mse(Y, Yhat) -> float:
    Y, Yhat = _paired(Y, Yhat)
    return float(np.mean((Y - Yhat) ** 2))


def mae(Y, Yhat) -> float:
    Y, Yhat = _paired(Y, Yhat)
    return float(np.mean(np.abs(Y - Yhat)))


def rse(Y, Yhat) -> float:
    """sqrt(sum (Y - Yhat)^2) / sqrt(sum (Y - mean(Y))^2), grand mean."""
    Y, Yhat = _paired(Y, Yhat)
    denom = float(np.sum((Y - Y.mean()) ** 2))
    if denom == 0.0:
        raise DataError("RSE undefined: target is constant over the test set")
    return math.sqrt(float(np.sum((Y - Yhat) ** 2))) / math.sqrt(denom)


def _as_time_by_var(a: np.ndarray) -> np.ndarray:
    # (K, L', N) stacks flatten to (K*L', N) in window-then-horizon order
    if a.ndim == 3:
        return a.reshape(-1, a.shape[-1])
    if a.ndim == 2:
        return a
    raise ShapeError(f"corr needs (time, vars) or (windows, steps, vars), got {a.shape}")


def corr_detail(Y, Yhat):
    """(average Pearson over variables, number of variables skipped)."""
    Y, Yhat = _paired(Y, Yhat)
    Y = _as_time_by_var(Y)
    Yhat = _as_time_by_var(Yhat)
    dy = Y - Y.mean(axis=0)
    dp = Yhat - Yhat.mean(axis=0)
    sy = np.sum(dy * dy, axis=0)
    sp = np.sum(dp * dp, axis=0)
    ok = (sy > 0.0) & (sp > 0.0)
    skipped = int(np.sum(~ok))
    if not np.any(ok):
        raise DataError("CORR undefined: every variable is degenerate")
    num = np.sum(dy[:, ok] * dp[:, ok], axis=0)
    r = num / np.sqrt(sy[ok] * sp[ok])
    return float(np.mean(r)), skipped


def corr(Y, Yhat) -> float:
    return corr_detail(Y, Yhat)[0]


def naive_repeat_last(window, L: int, mode: str):
    """Copy the last observed value across the horizon. Accepts one (N, T)
    window or a (B, N, T) stack; returns (L', N) or (B, L', N)."""
    w = np.asarray(window, dtype=np.float64)
    squeeze = w.ndim == 2
    if squeeze:
        w = w[None, :, :]
    if w.ndim != 3:
        raise ShapeError(f"naive baseline needs (N, T) or (B, N, T), got {w.shape}")
    last = w[:, :, -1]  # (B, N)
    steps = L if mode == MULTI_STEP else 1
    out = np.repeat(last[:, None, :], steps, axis=1)
    return out[0] if squeeze else out


@dataclass(frozen=True)
class MetricsReport:
    mse: float
    mae: float
    rse: float
    corr: float
    n_windows: int
    scale: str               # "standardized" or "raw"
    corr_skipped: int = 0

    def as_dict(self) -> dict:
        return {
            "mse": self.mse,
            "mae": self.mae,
            "rse": self.rse,
            "corr": self.corr,
            "n_windows": self.n_windows,
            "scale": self.scale,
            "corr_skipped": self.corr_skipped,
        }


def compute_metrics(targets, forecasts, scale: str) -> MetricsReport:
    """All four metrics over stacked (K, L', N) targets/forecasts."""
    Y, Yhat = _paired(targets, forecasts)
    c, skipped = corr_detail(Y, Yhat)
    return MetricsReport(
        mse=mse(Y, Yhat),
        mae=mae(Y, Yhat),
        rse=rse(Y, Yhat),
        corr=c,
        n_windows=int(Y.shape[0]) if Y.ndim == 3 else 1,
        scale=scale,
        corr_skipped=skipped,
    )


@dataclass(frozen=True)
class SeedSummary:
    values: tuple
    mean: float
    std: float  # sample std, n-1 denominator

    def as_dict(self) -> dict:
        return {"values": list(self.values), "mean": self.mean, "std": self.std}


def aggregate_seeds(values) -> SeedSummary:
    vals = [float(v) for v in values]
    if len(vals) < 2:
        raise DataError(f"seed aggregation needs >= 2 values, got {len(vals)}")
    # fsum is correctly rounded, so the summary is permutation-invariant
    m = math.fsum(vals) / len(vals)
    var = math.fsum((v - m) ** 2 for v in vals) / (len(vals) - 1)
    return SeedSummary(tuple(vals), m, math.sqrt(var))
