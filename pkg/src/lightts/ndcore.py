"""Minimal dense numeric kernel.

Everything is 64-bit float, 2-D, row-major (C-contiguous numpy arrays).
The forecasting graph is fixed, so each primitive ships its closed-form
backward instead of a general autodiff tape. `grad_check` is the
independent central-difference oracle used to verify every backward.

All functions are pure: identical inputs give bitwise-identical outputs
on a given platform. numpy carries the storage and the inner products.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ShapeError

Matrix = np.ndarray


def as_matrix(data) -> Matrix:
    """Coerce to a 2-D float64 array; reject anything that is not 2-D."""
    a = np.asarray(data, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got ndim={a.ndim}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ShapeError(f"matrix dimensions must be >= 1, got {a.shape}")
    return np.ascontiguousarray(a)


@dataclass
class ParamTensor:
    """A trainable array paired with its gradient accumulator.

    Gradients accumulate additively across backward calls; callers zero
    them between optimizer steps. One backward pass owns the grads for
    its duration (single writer).
    """

    name: str
    value: np.ndarray
    grad: np.ndarray = field(default=None)

    def __post_init__(self):
        self.value = np.asarray(self.value, dtype=np.float64)
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        elif self.grad.shape != self.value.shape:
            raise ShapeError(
                f"param {self.name}: grad shape {self.grad.shape} "
                f"!= value shape {self.value.shape}"
            )

    @property
    def size(self) -> int:
        return self.value.size

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    def copy(self) -> "ParamTensor":
        return ParamTensor(self.name, self.value.copy(), self.grad.copy())


def zero_grads(params) -> None:
    for p in params:
        p.zero_grad()


def matmul(A: Matrix, B: Matrix) -> Matrix:
    """C[i][j] = sum_l A[i][l]*B[l][j]; the reduction is delegated to BLAS,
    which is deterministic for a fixed build (same inputs, same bits)."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or B.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {A.shape} and {B.shape}")
    if A.shape[1] != B.shape[0]:
        raise ShapeError(f"matmul inner dimensions differ: {A.shape} x {B.shape}")
    return A @ B


def affine_forward(x: Matrix, W: Matrix, b: np.ndarray) -> Matrix:
    """out[i] = x[i] @ W + b, for each row i."""
    x = np.asarray(x, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if x.ndim != 2 or W.ndim != 2:
        raise ShapeError(f"affine needs 2-D x and W, got {x.shape} and {W.shape}")
    if x.shape[1] != W.shape[0]:
        raise ShapeError(f"affine: x cols {x.shape[1]} != W rows {W.shape[0]}")
    if b.shape[0] != W.shape[1]:
        raise ShapeError(f"affine: bias length {b.shape[0]} != W cols {W.shape[1]}")
    return x @ W + b


def affine_backward(x: Matrix, W: Matrix, d_out: Matrix):
    """Gradients of the matching affine_forward: (dX, dW, dB)."""
    x = np.asarray(x, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    d_out = np.asarray(d_out, dtype=np.float64)
    if d_out.shape != (x.shape[0], W.shape[1]):
        raise ShapeError(
            f"affine backward: d_out shape {d_out.shape} does not match "
            f"forward output {(x.shape[0], W.shape[1])}"
        )
    dX = d_out @ W.T
    dW = x.T @ d_out
    dB = d_out.sum(axis=0)
    return dX, dW, dB


def leaky_relu_forward(x: np.ndarray, slope: float) -> np.ndarray:
    """x for x >= 0, slope*x otherwise."""
    return np.where(x >= 0.0, x, slope * x)


def leaky_relu_backward(x: np.ndarray, d_out: np.ndarray, slope: float) -> np.ndarray:
    # derivative at exactly 0 is defined as 1
    return np.where(x >= 0.0, d_out, slope * d_out)


def grad_check(loss_fn, params, eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    `loss_fn()` must deterministically recompute the scalar loss from the
    current values of `params`. The analytic gradient is read from each
    param's `.grad`, so run the backward pass before calling this. For
    every entry: numeric = (f(v+eps) - f(v-eps)) / (2*eps), relative error
    = |analytic - numeric| / max(|analytic|, |numeric|, 1e-12).
    """
    if not (1e-7 <= eps <= 1e-3):
        raise ValueError(f"eps must lie in [1e-7, 1e-3], got {eps}")
    worst = 0.0
    for p in params:
        analytic = p.grad.copy()
        flat_value = p.value.reshape(-1)
        flat_analytic = analytic.reshape(-1)
        for i in range(flat_value.size):
            saved = flat_value[i]
            flat_value[i] = saved + eps
            f_plus = float(loss_fn())
            flat_value[i] = saved - eps
            f_minus = float(loss_fn())
            flat_value[i] = saved
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise NumericError(
                    f"non-finite loss while probing {p.name}[{i}]: "
                    f"f+={f_plus}, f-={f_minus}"
                )
            numeric = (f_plus - f_minus) / (2.0 * eps)
            a = flat_analytic[i]
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-12)
            if rel > worst:
                worst = rel
    return worst
