"""Shared test utilities: frozen deterministic cases, oracle-validity
guards for finite differencing, and an independent instrumented forward
pass used as the multiplication-count (and value) oracle."""

import math

import numpy as np

from lightts import model
from lightts.rng import SplitMix64, uniform_array

# Central differences are only a valid derivative estimate when no
# pre-activation sits within a probe-shift of the rectifier kink. Frozen
# test data is chosen (and asserted) to keep this margin.
KINK_MARGIN = 2e-4
GRAD_EPS = 1e-5


def min_pre_activation(cache) -> float:
    """Smallest |pre-activation| across every rectifier input in the model."""
    vals = [cache.mix_cache.t_pre]
    if cache.mix_cache.c_pre is not None:
        vals.append(cache.mix_cache.c_pre)
    for sub in (cache.con_cache, cache.int_cache):
        if sub is not None:
            vals.append(sub.t_pre)
            if sub.c_pre is not None:
                vals.append(sub.c_pre)
    return min(float(np.abs(v).min()) for v in vals)


def tiny_config(**overrides) -> model.LightTSConfig:
    kw = dict(N=3, T=8, L=2, C=2, F=4, Fp_ab=2, Fp_c=2, mode="multi_step")
    kw.update(overrides)
    return model.LightTSConfig(**kw)


def frozen_case(cfg, params, data_seed=24, scale=20.0):
    """Deterministic (window, target) for gradient checking.

    The window is scaled so pre-activations clear the kink; the target sits
    near the initial forecast so the loss stays O(1) and no gradient is
    drowned by roundoff.
    """
    g = SplitMix64(data_seed)
    window = uniform_array(g, (cfg.N, cfg.T), -1.0, 1.0) * scale
    f0, _ = model.forward(params, cfg, window)
    target = f0 + uniform_array(g, f0.shape, -1.0, 1.0)
    return window, target


def reference_forward_counting(cfg, params, window):
    """Independent per-series replay of the forward pass.

    Returns (forecast, multiplication count). Every scalar multiplication
    of a projection is tallied as rows*inner*cols of the matmul that
    performs it; bias adds and activations are not counted.
    """
    counter = {"mults": 0}

    def mm(A, B):
        A = np.asarray(A, dtype=np.float64)
        B = np.asarray(B, dtype=np.float64)
        counter["mults"] += A.shape[0] * A.shape[1] * B.shape[1]
        return A @ B

    def act(x):
        return np.where(x >= 0.0, x, cfg.slope * x)

    def block(Z, bp):
        zt = act(mm(bp.Wt.value.T, Z) + bp.bt.value[:, None])
        if bp.channel_identity:
            zc = zt
        else:
            zc = act(mm(zt, bp.Wc.value) + bp.bc.value)
        return mm(bp.Wo.value.T, zc) + bp.bo.value[:, None]

    window = np.asarray(window, dtype=np.float64)
    n_sub = cfg.T // cfg.C
    cols = []
    for n in range(cfg.N):
        w = window[n]
        feats = []
        if cfg.has_continuous:
            Z = w.reshape(n_sub, cfg.C).T
            A = block(Z, params.block_a)
            fa = mm(A, params.down_a_w.value.reshape(-1, 1)).ravel()
            feats.append(fa + params.down_a_b.value[0])
        if cfg.has_interval:
            Z = w.reshape(cfg.C, n_sub)
            Bf = block(Z, params.block_b)
            fb = mm(Bf, params.down_b_w.value.reshape(-1, 1)).ravel()
            feats.append(fb + params.down_b_b.value[0])
        cols.append(np.concatenate(feats))
    mix = np.stack(cols, axis=1)
    out = block(mix, params.block_c)
    return out, counter["mults"]


def sinusoid_values(n_rows: int, period: float = 24.0, n_series: int = 1) -> np.ndarray:
    t = np.arange(n_rows, dtype=np.float64)
    cols = [np.sin(2.0 * math.pi * (t / period + 0.13 * k)) for k in range(n_series)]
    return np.stack(cols, axis=1)


def write_sinusoid_csv(path, n_rows: int = 480, period: float = 24.0, n_series: int = 1):
    vals = sinusoid_values(n_rows, period, n_series)
    names = [f"s{k}" for k in range(n_series)]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("date," + ",".join(names) + "\n")
        for i in range(n_rows):
            row = ",".join(repr(v) for v in vals[i])
            fh.write(f"2020-01-01T{i:05d},{row}\n")
    return vals
