"""Loss, Adam, and the deterministic mini-batch training loop.

The objective is MSE on standardized values. Shuffle order is driven
solely by the seed's shuffle stream, so two runs with the same seed
produce bit-identical trajectories. Early stopping keeps the parameters
of the best validation epoch, not the last one.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import metrics, model
from .errors import ConfigError, NumericError, ShapeError
from .rng import SHUFFLE_STREAM, SplitMix64, seeded_rng  # noqa: F401  (seeded_rng is part of the public surface)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    batch_size: int = 32
    max_epochs: int = 100
    patience: int = 10
    seed: int = 0
    shuffle: bool = True
    clip_norm: float = None   # global gradient-norm clip; None disables
    max_steps: int = None     # optimizer-step budget; None disables

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        for name in ("beta1", "beta2"):
            b = getattr(self, name)
            if not 0.0 <= b < 1.0:
                raise ConfigError(f"{name} must lie in [0, 1), got {b}")
        if self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ConfigError("batch_size and max_epochs must be >= 1")


def mse_loss(forecast, target):
    """(mean squared error, gradient w.r.t. forecast)."""
    f = np.asarray(forecast, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if f.shape != t.shape:
        raise ShapeError(f"loss operands differ in shape: {f.shape} vs {t.shape}")
    diff = f - t
    loss = float(np.mean(diff**2))
    return loss, 2.0 * diff / diff.size


class AdamState:
    """First/second moment accumulators keyed by parameter name."""

    def __init__(self, params):
        self.m = {p.name: np.zeros_like(p.value) for p in params}
        self.v = {p.name: np.zeros_like(p.value) for p in params}
        self.t = 0


def adam_step(params, state: AdamState, cfg: TrainConfig) -> None:
    """One bias-corrected Adam update over `params`; zeroes grads after."""
    if cfg.clip_norm is not None:
        total = 0.0
        for p in params:
            total += float(np.sum(p.grad**2))
        norm = total**0.5
        if norm > cfg.clip_norm:
            scale = cfg.clip_norm / norm
            for p in params:
                p.grad *= scale
    state.t += 1
    c1 = 1.0 - cfg.beta1**state.t
    c2 = 1.0 - cfg.beta2**state.t
    for p in params:
        g = p.grad
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in parameter {p.name}")
        m = state.m[p.name]
        v = state.v[p.name]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * g * g
        p.value -= cfg.lr * (m / c1) / (np.sqrt(v / c2) + cfg.eps_adam)
        p.zero_grad()


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_mse: float
    val_mse: float
    wall_ms: float


@dataclass
class TrainResult:
    best_params: "model.ModelParams"
    history: list
    best_epoch: int
    best_val_mse: float
    steps: int
    stopped_early: bool = False


def evaluate_forecasts(params, cfg, windows, chunk: int = 256) -> np.ndarray:
    """Forward a whole WindowBatch in fixed-size chunks; returns (K, L', N)."""
    outs = []
    inputs = windows.inputs
    for a in range(0, inputs.shape[0], chunk):
        f, _ = model.forward_batch(params, cfg, inputs[a:a + chunk])
        outs.append(f)
    return np.concatenate(outs, axis=0)


def validation_mse(params, cfg, windows) -> float:
    return metrics.mse(windows.targets, evaluate_forecasts(params, cfg, windows))


def train_loop(model_cfg, params, train_windows, val_windows, cfg: TrainConfig) -> TrainResult:
    """Shuffled mini-batch epochs with early stopping on validation MSE."""
    if len(train_windows) == 0 or len(val_windows) == 0:
        raise ConfigError("training and validation window sets must be nonempty")
    trainable = params.trainable()
    state = AdamState(trainable)
    gen = seeded_rng(cfg.seed, SHUFFLE_STREAM)

    history = []
    best_val = float("inf")
    best_epoch = -1
    best_params = params.copy()
    bad_epochs = 0
    steps = 0
    stopped_early = False
    inputs, targets = train_windows.inputs, train_windows.targets
    n = inputs.shape[0]

    for epoch in range(1, cfg.max_epochs + 1):
        tic = time.perf_counter()
        order = list(range(n))
        if cfg.shuffle:
            gen.shuffle(order)
        sq_sum = 0.0
        seen = 0
        for a in range(0, n, cfg.batch_size):
            idx = order[a:a + cfg.batch_size]
            xb = inputs[idx]
            yb = targets[idx]
            forecast, cache = model.forward_batch(params, model_cfg, xb)
            loss, d_forecast = mse_loss(forecast, yb)
            if not np.isfinite(loss):
                raise NumericError(
                    f"non-finite training loss at epoch {epoch}, batch {a // cfg.batch_size}"
                )
            model.backward_batch(cache, d_forecast)
            adam_step(trainable, state, cfg)
            sq_sum += loss * forecast.size
            seen += forecast.size
            steps += 1
            if cfg.max_steps is not None and steps >= cfg.max_steps:
                break
        train_mse = sq_sum / seen
        val_mse = validation_mse(params, model_cfg, val_windows)
        wall_ms = (time.perf_counter() - tic) * 1000.0
        history.append(EpochStats(epoch, train_mse, val_mse, wall_ms))

        if val_mse < best_val:
            best_val = val_mse
            best_epoch = epoch
            best_params = params.copy()
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= cfg.patience:
                stopped_early = True
                break
        if cfg.max_steps is not None and steps >= cfg.max_steps:
            break

    return TrainResult(best_params, history, best_epoch, best_val, steps, stopped_early)
