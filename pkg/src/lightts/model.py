"""Two-part assembly of the forecaster.

Part I runs per series: the length-T window is reshaped by continuous and
interval sampling into C x (T/C) maps, block A (continuous) and block B
(interval) lift each to F x (T/C), and a shared linear map R^(T/C) -> R
collapses every feature row to one scalar, yielding an F-vector per block
per series. Blocks A/B and the down-projections are shared across all N
series.

Part II stacks the per-series vectors into a 2F x N map (continuous
features in rows 0..F-1, interval features in rows F..2F-1) and block C
maps it to the L x N forecast (1 x N in single-step mode, where the target
is the single point L steps ahead).

Ablations: `no_cp` removes block C's channel exchange, `no_is` drops the
interval branch, `no_cs` drops the continuous branch (block C's input then
shrinks to F x N).
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import ieblock, rng as _rng
from .errors import ConfigError, ShapeError
from .ieblock import IEBlockParams, IEBlockShape
from .ndcore import ParamTensor

MULTI_STEP = "multi_step"
SINGLE_STEP = "single_step"
ABLATIONS = ("no_cp", "no_is", "no_cs")
VARIANTS = ("full",) + ABLATIONS


@dataclass(frozen=True)
class LightTSConfig:
    N: int                      # number of series
    T: int                      # look-back length
    L: int                      # horizon (offset of the single step in single_step mode)
    C: int                      # sub-sequence length
    F: int                      # per-branch feature width
    Fp_ab: int                  # bottleneck of blocks A/B
    Fp_c: int                   # bottleneck of block C
    mode: str = MULTI_STEP
    slope: float = 0.01
    ablation: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        for name in ("N", "T", "L", "C", "F", "Fp_ab", "Fp_c"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.T < 2:
            raise ConfigError(f"look-back T must be >= 2, got {self.T}")
        if self.mode not in (MULTI_STEP, SINGLE_STEP):
            raise ConfigError(f"mode must be {MULTI_STEP} or {SINGLE_STEP}, got {self.mode!r}")
        if not 0.0 < self.slope < 1.0:
            raise ConfigError(f"activation slope must lie in (0, 1), got {self.slope}")
        object.__setattr__(self, "ablation", frozenset(self.ablation))
        unknown = self.ablation - set(ABLATIONS)
        if unknown:
            raise ConfigError(f"unknown ablation flags: {sorted(unknown)}")
        if {"no_is", "no_cs"} <= self.ablation:
            raise ConfigError("cannot ablate both sampling branches (no_is + no_cs)")
        from .sampling import check_chunk_len  # avoids import cycle at module load

        check_chunk_len(self.T, self.C)

    @property
    def n_sub(self) -> int:
        return self.T // self.C

    @property
    def has_continuous(self) -> bool:
        return "no_cs" not in self.ablation

    @property
    def has_interval(self) -> bool:
        return "no_is" not in self.ablation

    @property
    def channel_exchange(self) -> bool:
        return "no_cp" not in self.ablation

    @property
    def out_steps(self) -> int:
        return self.L if self.mode == MULTI_STEP else 1

    @property
    def branch_shape(self) -> IEBlockShape:
        return IEBlockShape(H=self.C, W=self.n_sub, Fp=self.Fp_ab, F=self.F)

    @property
    def mix_shape(self) -> IEBlockShape:
        height = 2 * self.F if (self.has_continuous and self.has_interval) else self.F
        return IEBlockShape(H=height, W=self.N, Fp=self.Fp_c, F=self.out_steps)


def build_ablation(cfg: LightTSConfig, variant: str) -> LightTSConfig:
    """Config for one named variant; 'full' clears all flags."""
    if variant == "full":
        return replace(cfg, ablation=frozenset())
    if variant not in ABLATIONS:
        raise ConfigError(f"unknown variant {variant!r}; choose from {VARIANTS}")
    return replace(cfg, ablation=frozenset({variant}))


@dataclass
class ModelParams:
    """All trainable arrays. Absent branches are None; under no_cp the
    channel arrays of block_c exist but are frozen at identity/zero."""

    block_a: IEBlockParams
    down_a_w: ParamTensor
    down_a_b: ParamTensor
    block_b: IEBlockParams
    down_b_w: ParamTensor
    down_b_b: ParamTensor
    block_c: IEBlockParams

    def tensors(self) -> list:
        """Every stored array in manifest order (frozen ones included)."""
        out = []
        if self.block_a is not None:
            out += self.block_a.tensors() + [self.down_a_w, self.down_a_b]
        if self.block_b is not None:
            out += self.block_b.tensors() + [self.down_b_w, self.down_b_b]
        out += self.block_c.tensors()
        return out

    def trainable(self) -> list:
        out = []
        if self.block_a is not None:
            out += self.block_a.trainable() + [self.down_a_w, self.down_a_b]
        if self.block_b is not None:
            out += self.block_b.trainable() + [self.down_b_w, self.down_b_b]
        out += self.block_c.trainable()
        return out

    def trainable_count(self) -> int:
        return sum(t.size for t in self.trainable())

    def zero_grads(self) -> None:
        for t in self.tensors():
            t.zero_grad()

    def copy(self) -> "ModelParams":
        def cp(x):
            return None if x is None else x.copy()

        return ModelParams(
            cp(self.block_a), cp(self.down_a_w), cp(self.down_a_b),
            cp(self.block_b), cp(self.down_b_w), cp(self.down_b_b),
            self.block_c.copy(),
        )


def init_params(cfg: LightTSConfig, seed: int) -> ModelParams:
    """Deterministic initialization: weights uniform +-sqrt(1/fan_in) drawn
    from the init stream of `seed` in manifest order, biases zero."""
    gen = _rng.seeded_rng(seed, _rng.INIT_STREAM)
    n_sub = cfg.n_sub
    bound = (1.0 / n_sub) ** 0.5

    def branch(prefix):
        blk = IEBlockParams.init(cfg.branch_shape, gen, prefix)
        w = ParamTensor(f"{prefix}.down_w", _rng.uniform_array(gen, (n_sub,), -bound, bound))
        b = ParamTensor(f"{prefix}.down_b", np.zeros(1))
        return blk, w, b

    block_a = down_a_w = down_a_b = None
    block_b = down_b_w = down_b_b = None
    if cfg.has_continuous:
        block_a, down_a_w, down_a_b = branch("block_a")
    if cfg.has_interval:
        block_b, down_b_w, down_b_b = branch("block_b")
    block_c = IEBlockParams.init(
        cfg.mix_shape, gen, "block_c", channel_identity=not cfg.channel_exchange
    )
    return ModelParams(block_a, down_a_w, down_a_b, block_b, down_b_w, down_b_b, block_c)


@dataclass
class ModelCache:
    cfg: LightTSConfig
    params: ModelParams
    batch: int
    con_in: np.ndarray
    con_feat: np.ndarray
    con_cache: ieblock.IEBlockCache
    int_in: np.ndarray
    int_feat: np.ndarray
    int_cache: ieblock.IEBlockCache
    mix_cache: ieblock.IEBlockCache
    squeeze: bool


def forward_batch(params: ModelParams, cfg: LightTSConfig, windows):
    """Forecast a stack of windows: (B, N, T) -> (B, L', N)."""
    w = np.asarray(windows, dtype=np.float64)
    squeeze = w.ndim == 2
    if squeeze:
        w = w[None, :, :]
    if w.ndim != 3 or w.shape[1] != cfg.N or w.shape[2] != cfg.T:
        raise ShapeError(
            f"window batch shape {np.asarray(windows).shape} does not match "
            f"(N, T)=({cfg.N}, {cfg.T})"
        )
    B = w.shape[0]
    series = w.reshape(B * cfg.N, cfg.T)
    n_sub = cfg.n_sub

    con_in = con_feat = con_cache = None
    int_in = int_feat = int_cache = None
    parts = []
    if cfg.has_continuous:
        # per-series continuous map, entry (i, j) = w[j*C + i] (0-indexed)
        con_in = series.reshape(B * cfg.N, n_sub, cfg.C).transpose(0, 2, 1)
        A, con_cache = ieblock.forward_many(con_in, params.block_a, cfg.slope)
        con_feat = A  # (B*N, F, n_sub)
        fa = A @ params.down_a_w.value + params.down_a_b.value[0]
        parts.append(fa)
    if cfg.has_interval:
        int_in = series.reshape(B * cfg.N, cfg.C, n_sub)
        Bm, int_cache = ieblock.forward_many(int_in, params.block_b, cfg.slope)
        int_feat = Bm
        fb = Bm @ params.down_b_w.value + params.down_b_b.value[0]
        parts.append(fb)

    feats = np.concatenate(parts, axis=1)  # (B*N, F or 2F)
    mix_in = feats.reshape(B, cfg.N, -1).transpose(0, 2, 1)  # (B, 2F, N)
    forecast, mix_cache = ieblock.forward_many(mix_in, params.block_c, cfg.slope)

    cache = ModelCache(
        cfg, params, B,
        con_in, con_feat, con_cache,
        int_in, int_feat, int_cache,
        mix_cache, squeeze,
    )
    return (forecast[0] if squeeze else forecast), cache


def forward(params: ModelParams, cfg: LightTSConfig, window):
    """Forecast one window: (N, T) -> (L', N)."""
    w = np.asarray(window, dtype=np.float64)
    if w.ndim != 2:
        raise ShapeError(f"forward expects one (N, T) window, got shape {w.shape}")
    return forward_batch(params, cfg, w)


def backward_batch(cache: ModelCache, d_forecast):
    """Accumulate parameter gradients; returns gradient w.r.t. the windows."""
    cfg, params, B = cache.cfg, cache.params, cache.batch
    d = np.asarray(d_forecast, dtype=np.float64)
    if cache.squeeze:
        d = d[None, :, :]
    if d.shape != (B, cfg.out_steps, cfg.N):
        raise ShapeError(
            f"forecast gradient shape {d.shape}, expected {(B, cfg.out_steps, cfg.N)}"
        )

    d_mix_in = ieblock.backward_many(cache.mix_cache, d)  # (B, 2F, N)
    d_feats = d_mix_in.transpose(0, 2, 1).reshape(B * cfg.N, -1)

    d_series = np.zeros((B * cfg.N, cfg.T))
    col = 0
    if cfg.has_continuous:
        dfa = d_feats[:, col:col + cfg.F]
        col += cfg.F
        # fa = A @ w + b
        params.down_a_w.grad += np.einsum("kft,kf->t", cache.con_feat, dfa)
        params.down_a_b.grad += dfa.sum()
        dA = dfa[:, :, None] * params.down_a_w.value[None, None, :]
        d_con_in = ieblock.backward_many(cache.con_cache, dA)
        d_series += d_con_in.transpose(0, 2, 1).reshape(B * cfg.N, cfg.T)
    if cfg.has_interval:
        dfb = d_feats[:, col:col + cfg.F]
        params.down_b_w.grad += np.einsum("kft,kf->t", cache.int_feat, dfb)
        params.down_b_b.grad += dfb.sum()
        dB = dfb[:, :, None] * params.down_b_w.value[None, None, :]
        d_int_in = ieblock.backward_many(cache.int_cache, dB)
        d_series += d_int_in.reshape(B * cfg.N, cfg.T)

    d_windows = d_series.reshape(B, cfg.N, cfg.T)
    return d_windows[0] if cache.squeeze else d_windows


def backward(cache: ModelCache, d_forecast):
    return backward_batch(cache, d_forecast)


def model_mac_count(cfg: LightTSConfig) -> int:
    """Multiply-accumulates of one single-window forward pass."""
    total = 0
    per_branch = ieblock.mac_count(cfg.branch_shape)
    down = cfg.F * cfg.n_sub
    if cfg.has_continuous:
        total += cfg.N * (per_branch + down)
    if cfg.has_interval:
        total += cfg.N * (per_branch + down)
    total += ieblock.mac_count(cfg.mix_shape, include_channel=cfg.channel_exchange)
    return total


def trainable_param_count(cfg: LightTSConfig) -> int:
    """Trainable scalars, computed from shapes alone."""
    total = 0
    branch = ieblock.param_count(cfg.branch_shape) + cfg.n_sub + 1
    if cfg.has_continuous:
        total += branch
    if cfg.has_interval:
        total += branch
    total += ieblock.param_count(cfg.mix_shape)
    if not cfg.channel_exchange:
        total -= cfg.N * cfg.N + cfg.N
    return total
