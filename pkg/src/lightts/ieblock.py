"""Information exchange block: the only building block of the forecaster.

The block maps an H x W feature map to F x W through three weight-shared
projections:

    temporal  (per column):  zt_col = act(Wt' @ z_col + bt)   H  -> F'
    channel   (per row):     zc_row = act(zt_row @ Wc + bc)   W  -> W
    output    (per column):  o_col  = Wo' @ zc_col + bo       F' -> F

`act` is a leaky rectifier (configurable slope); the output projection is
linear. F' is a bottleneck kept small relative to H and F so that the
channel exchange stays cheap. The same math also runs on stacks of K maps
(shape (K, H, W)) for batched training; parameter gradients then sum over
the stack.

A block can be built with `channel_identity=True`, which removes the
channel stage entirely (used by the no-channel-projection ablation): the
channel arrays stay pinned at identity/zero and receive no gradient.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from .errors import ShapeError
from .ndcore import ParamTensor, leaky_relu_backward, leaky_relu_forward


@dataclass(frozen=True)
class IEBlockShape:
    H: int   # input temporal dim
    W: int   # channel dim (columns)
    Fp: int  # bottleneck width
    F: int   # output feature dim

    def __post_init__(self):
        for name in ("H", "W", "Fp", "F"):
            v = getattr(self, name)
            if v < 1:
                raise ShapeError(f"block dim {name} must be >= 1, got {v}")
        if self.Fp > self.F or self.Fp > self.H:
            warnings.warn(
                f"bottleneck Fp={self.Fp} is not smaller than H={self.H} "
                f"and F={self.F}; the block loses its bottleneck economy",
                stacklevel=3,
            )


def param_count(shape: IEBlockShape) -> int:
    """Trainable scalars in one block: H*Fp + Fp + W^2 + W + Fp*F + F."""
    return (
        shape.H * shape.Fp + shape.Fp
        + shape.W * shape.W + shape.W
        + shape.Fp * shape.F + shape.F
    )


@dataclass(frozen=True)
class OpCounts:
    macs: int         # multiply-accumulates of the three projections
    adds: int         # bias additions (excluded from MACs)
    activations: int  # rectifier applications (excluded from MACs)


def op_counts(shape: IEBlockShape, include_channel: bool = True) -> OpCounts:
    H, W, Fp, F = shape.H, shape.W, shape.Fp, shape.F
    macs = W * H * Fp + W * Fp * F
    adds = Fp * W + F * W
    acts = Fp * W
    if include_channel:
        macs += Fp * W * W
        adds += Fp * W
        acts += Fp * W
    return OpCounts(macs, adds, acts)


def mac_count(shape: IEBlockShape, include_channel: bool = True) -> int:
    """Multiply-accumulates of one forward pass (biases/activations excluded)."""
    return op_counts(shape, include_channel).macs


@dataclass
class IEBlockParams:
    """The six arrays of one block. Wc/bc are frozen when channel_identity."""

    shape: IEBlockShape
    Wt: ParamTensor  # H x Fp
    bt: ParamTensor  # Fp
    Wc: ParamTensor  # W x W
    bc: ParamTensor  # W
    Wo: ParamTensor  # Fp x F
    bo: ParamTensor  # F
    channel_identity: bool = False

    @classmethod
    def init(cls, shape: IEBlockShape, gen: _rng.SplitMix64, prefix: str,
             channel_identity: bool = False) -> "IEBlockParams":
        """Weights uniform on +-sqrt(1/fan_in), biases zero. Draw order is
        Wt, Wc, Wo (row-major within each array); frozen arrays are not drawn."""
        H, W, Fp, F = shape.H, shape.W, shape.Fp, shape.F

        def u(rows, cols, fan_in):
            bound = (1.0 / fan_in) ** 0.5
            return _rng.uniform_array(gen, (rows, cols), -bound, bound)

        Wt = u(H, Fp, H)
        if channel_identity:
            Wc = np.eye(W)
        else:
            Wc = u(W, W, W)
        Wo = u(Fp, F, Fp)
        return cls(
            shape=shape,
            Wt=ParamTensor(f"{prefix}.Wt", Wt),
            bt=ParamTensor(f"{prefix}.bt", np.zeros(Fp)),
            Wc=ParamTensor(f"{prefix}.Wc", Wc),
            bc=ParamTensor(f"{prefix}.bc", np.zeros(W)),
            Wo=ParamTensor(f"{prefix}.Wo", Wo),
            bo=ParamTensor(f"{prefix}.bo", np.zeros(F)),
            channel_identity=channel_identity,
        )

    def tensors(self) -> list:
        """All six arrays, fixed manifest order."""
        return [self.Wt, self.bt, self.Wc, self.bc, self.Wo, self.bo]

    def trainable(self) -> list:
        if self.channel_identity:
            return [self.Wt, self.bt, self.Wo, self.bo]
        return self.tensors()

    def copy(self) -> "IEBlockParams":
        return IEBlockParams(
            self.shape,
            *(t.copy() for t in self.tensors()),
            channel_identity=self.channel_identity,
        )


@dataclass
class IEBlockCache:
    params: IEBlockParams
    slope: float
    Z: np.ndarray
    t_pre: np.ndarray
    Zt: np.ndarray
    c_pre: np.ndarray  # None when the channel stage is skipped
    Zc: np.ndarray
    squeeze: bool      # True when the caller passed a single 2-D map


def _check_input(Z: np.ndarray, shape: IEBlockShape) -> None:
    if Z.shape[-2] != shape.H or Z.shape[-1] != shape.W:
        raise ShapeError(
            f"block input {Z.shape[-2:]} does not match (H, W)="
            f"({shape.H}, {shape.W})"
        )


def forward_many(Z: np.ndarray, p: IEBlockParams, slope: float):
    """Forward over a stack of maps, shape (K, H, W) -> (K, F, W)."""
    Z = np.asarray(Z, dtype=np.float64)
    squeeze = Z.ndim == 2
    if squeeze:
        Z = Z[None, :, :]
    if Z.ndim != 3:
        raise ShapeError(f"block input must be (H, W) or (K, H, W), got {Z.shape}")
    _check_input(Z, p.shape)

    t_pre = np.matmul(p.Wt.value.T, Z) + p.bt.value[:, None]
    Zt = leaky_relu_forward(t_pre, slope)
    if p.channel_identity:
        c_pre, Zc = None, Zt
    else:
        c_pre = np.matmul(Zt, p.Wc.value) + p.bc.value
        Zc = leaky_relu_forward(c_pre, slope)
    O = np.matmul(p.Wo.value.T, Zc) + p.bo.value[:, None]

    cache = IEBlockCache(p, slope, Z, t_pre, Zt, c_pre, Zc, squeeze)
    return (O[0] if squeeze else O), cache


def backward_many(cache: IEBlockCache, dO: np.ndarray) -> np.ndarray:
    """Chain rule through the three projections; accumulates into grads,
    returns the gradient w.r.t. the input stack."""
    p, slope = cache.params, cache.slope
    dO = np.asarray(dO, dtype=np.float64)
    if cache.squeeze:
        dO = dO[None, :, :]
    want = (cache.Z.shape[0], p.shape.F, p.shape.W)
    if dO.shape != want:
        raise ShapeError(f"upstream gradient shape {dO.shape}, expected {want}")

    # output projection: O = Wo' @ Zc + bo
    p.bo.grad += dO.sum(axis=(0, 2))
    p.Wo.grad += np.einsum("kpw,kfw->pf", cache.Zc, dO)
    dZc = np.matmul(p.Wo.value, dO)

    # channel projection: Zc = act(Zt @ Wc + bc), skipped under identity
    if p.channel_identity:
        dZt = dZc
    else:
        dc_pre = leaky_relu_backward(cache.c_pre, dZc, slope)
        p.bc.grad += dc_pre.sum(axis=(0, 1))
        p.Wc.grad += np.einsum("kpw,kpv->wv", cache.Zt, dc_pre)
        dZt = np.matmul(dc_pre, p.Wc.value.T)

    # temporal projection: Zt = act(Wt' @ Z + bt)
    dt_pre = leaky_relu_backward(cache.t_pre, dZt, slope)
    p.bt.grad += dt_pre.sum(axis=(0, 2))
    p.Wt.grad += np.einsum("khw,kfw->hf", cache.Z, dt_pre)
    dZ = np.matmul(p.Wt.value, dt_pre)

    return dZ[0] if cache.squeeze else dZ


def ieblock_forward(Z, p: IEBlockParams, slope: float):
    """Single-map forward: (H, W) -> (F, W) plus the cache for backward."""
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2:
        raise ShapeError(f"ieblock_forward expects a 2-D map, got {Z.shape}")
    return forward_many(Z, p, slope)


def ieblock_backward(cache: IEBlockCache, dO) -> np.ndarray:
    return backward_many(cache, dO)
