"""Dense numerical kernels for the encoder and classifier head.

All kernels operate on float32 C-order numpy arrays ("tensors") and are
pure functions: same inputs, same bits, every call.  There is no implicit
padding anywhere; conv output lengths are fully determined by
(T, kernel, stride).
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

from .errors import InputTooShortError, ShapeError

_INV_SQRT2 = float(1.0 / np.sqrt(2.0))


def _as_f32(x: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(x, dtype=np.float32)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product of a (m, k) and b (k, n)."""
    a = _as_f32(a)
    b = _as_f32(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} x {b.shape}")
    return a @ b


def conv1d(
    x: np.ndarray,
    weight: np.ndarray,
    stride: int = 1,
    groups: int = 1,
    bias: np.ndarray | None = None,
) -> np.ndarray:
    """1-D cross-correlation of x (c_in, T) with weight (c_out, c_in/groups, k).

    Output has shape (c_out, T') with T' = floor((T - k) / stride) + 1.
    """
    x = _as_f32(x)
    weight = _as_f32(weight)
    if x.ndim != 2 or weight.ndim != 3:
        raise ShapeError(f"conv1d expects (c_in, T) and (c_out, cpg, k), got {x.shape}, {weight.shape}")
    if stride < 1:
        raise ShapeError(f"stride must be >= 1, got {stride}")
    c_in, t = x.shape
    c_out, cpg, k = weight.shape
    if groups < 1 or c_in % groups != 0 or c_out % groups != 0:
        raise ShapeError(f"channels ({c_in} in, {c_out} out) not divisible by groups={groups}")
    if cpg != c_in // groups:
        raise ShapeError(f"weight expects {cpg} channels per group, input provides {c_in // groups}")
    if t < k:
        raise InputTooShortError(f"input length {t} shorter than kernel {k}", min_samples=k)

    # (c_in, T-k+1, k) strided view, subsampled to (c_in, T', k); the
    # reshape below turns each group into one sgemm call.
    windows = np.lib.stride_tricks.sliding_window_view(x, k, axis=1)[:, ::stride, :]
    t_out = windows.shape[1]
    out = np.empty((c_out, t_out), dtype=np.float32)
    opg = c_out // groups
    for g in range(groups):
        w = weight[g * opg : (g + 1) * opg].reshape(opg, cpg * k)
        v = windows[g * cpg : (g + 1) * cpg].transpose(1, 0, 2).reshape(t_out, cpg * k)
        out[g * opg : (g + 1) * opg] = w @ v.T
    if bias is not None:
        bias = _as_f32(bias)
        if bias.shape != (c_out,):
            raise ShapeError(f"bias shape {bias.shape} != ({c_out},)")
        out += bias[:, None]
    return out


def layer_norm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Normalize the last axis of x to zero mean / unit variance, then affine."""
    x = _as_f32(x)
    gamma = _as_f32(gamma)
    beta = _as_f32(beta)
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeError(f"layer_norm affine shapes {gamma.shape}/{beta.shape} != ({d},)")
    # Statistics in double precision: float32 cancellation on small-variance
    # rows otherwise breaks the 1e-5 oracle contract.
    x64 = x.astype(np.float64)
    mean = x64.mean(axis=-1, keepdims=True)
    var = x64.var(axis=-1, keepdims=True)
    xhat = (x64 - mean) / np.sqrt(var + eps)
    return (xhat * gamma + beta).astype(np.float32)


def group_norm(
    x: np.ndarray,
    num_groups: int,
    gamma: np.ndarray,
    beta: np.ndarray,
    eps: float = 1e-5,
) -> np.ndarray:
    """Normalize x (c, T) jointly over each (channel-group x time) block."""
    x = _as_f32(x)
    gamma = _as_f32(gamma)
    beta = _as_f32(beta)
    if x.ndim != 2:
        raise ShapeError(f"group_norm expects (c, T), got {x.shape}")
    c, t = x.shape
    if num_groups < 1 or c % num_groups != 0:
        raise ShapeError(f"{c} channels not divisible by num_groups={num_groups}")
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError(f"group_norm affine shapes {gamma.shape}/{beta.shape} != ({c},)")
    g = x.astype(np.float64).reshape(num_groups, (c // num_groups) * t)
    mean = g.mean(axis=1, keepdims=True)
    var = g.var(axis=1, keepdims=True)
    xhat = ((g - mean) / np.sqrt(var + eps)).reshape(c, t)
    return (xhat * gamma[:, None] + beta[:, None]).astype(np.float32)


def gelu(x: np.ndarray) -> np.ndarray:
    """Exact GELU, x * Phi(x), with Phi the standard normal CDF."""
    x = _as_f32(x)
    return (x * 0.5 * (1.0 + erf(x * _INV_SQRT2))).astype(np.float32)


def softmax(x: np.ndarray) -> np.ndarray:
    """Max-shifted softmax over the last axis."""
    x = _as_f32(x)
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def relu(x: np.ndarray) -> np.ndarray:
    x = _as_f32(x)
    return np.maximum(x, np.float32(0.0))
