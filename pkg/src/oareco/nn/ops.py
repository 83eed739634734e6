"""Numerical primitives of the inference engine.

All operations take and return channel-first arrays (C, H, W) and preserve
the input dtype (float32 or float64). Convolution is implemented as im2col
plus a matrix product; every op is deterministic for fixed inputs.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

BN_EPS = 1e-3


def _check_chw(x: np.ndarray, name: str = "input") -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 3:
        raise ValueError(f"{name} must have shape (C, H, W), got {x.shape}")
    return x


def conv2d(x, weight, bias=None, stride: int = 1, padding: int | None = None, groups: int = 1):
    """2D cross-correlation with 'same' padding policy.

    ``weight`` has shape (out_ch, in_ch / groups, k, k); ``padding`` defaults
    to k // 2, which keeps the spatial size at stride 1 and yields
    ceil(in / stride) otherwise.
    """
    x = _check_chw(x)
    weight = np.asarray(weight)
    if weight.ndim != 4 or weight.shape[2] != weight.shape[3]:
        raise ValueError(f"weight must have shape (out_ch, in_ch/groups, k, k), got {weight.shape}")
    out_ch, in_per_group, k, _ = weight.shape
    in_ch = x.shape[0]
    if groups < 1 or in_ch % groups or out_ch % groups:
        raise ValueError(f"groups={groups} must divide in_ch={in_ch} and out_ch={out_ch}")
    if in_per_group != in_ch // groups:
        raise ValueError(
            f"weight expects {in_per_group} channels per group, input provides {in_ch // groups}"
        )
    if stride not in (1, 2):
        raise ValueError(f"stride must be 1 or 2, got {stride}")
    if padding is None:
        padding = k // 2

    if padding:
        x = np.pad(x, ((0, 0), (padding, padding), (padding, padding)))
    windows = sliding_window_view(x, (k, k), axis=(1, 2))[:, ::stride, ::stride]
    c, h_out, w_out = windows.shape[:3]

    if groups == in_ch and out_ch == in_ch:
        # depthwise fast path: one kernel per channel
        out = np.einsum("chwij,cij->chw", windows, weight[:, 0], optimize=True)
    elif groups == 1:
        cols = windows.transpose(1, 2, 0, 3, 4).reshape(h_out * w_out, in_ch * k * k)
        out = (cols @ weight.reshape(out_ch, -1).T).T.reshape(out_ch, h_out, w_out)
    else:
        cpg, opg = in_ch // groups, out_ch // groups
        parts = []
        for g in range(groups):
            win_g = windows[g * cpg : (g + 1) * cpg]
            cols = win_g.transpose(1, 2, 0, 3, 4).reshape(h_out * w_out, cpg * k * k)
            w_g = weight[g * opg : (g + 1) * opg].reshape(opg, -1)
            parts.append((cols @ w_g.T).T.reshape(opg, h_out, w_out))
        out = np.concatenate(parts, axis=0)

    out = np.ascontiguousarray(out, dtype=x.dtype)
    if bias is not None:
        bias = np.asarray(bias, dtype=x.dtype)
        if bias.shape != (out_ch,):
            raise ValueError(f"bias must have shape ({out_ch},), got {bias.shape}")
        out += bias[:, None, None]
    return out


def _check_bn_params(c: int, gamma, beta, mean, var):
    for name, arr in (("gamma", gamma), ("beta", beta), ("mean", mean), ("var", var)):
        arr = np.asarray(arr)
        if arr.shape != (c,):
            raise ValueError(f"batch-norm {name} must have shape ({c},), got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError(f"batch-norm {name} contains non-finite values")
    if (np.asarray(var) < 0).any():
        raise ValueError("batch-norm var must be >= 0")


def batch_norm(x, gamma, beta, mean, var, eps: float = BN_EPS):
    """Inference-mode normalization: gamma * (x - mean) / sqrt(var + eps) + beta."""
    x = _check_chw(x)
    c = x.shape[0]
    _check_bn_params(c, gamma, beta, mean, var)
    dt = x.dtype
    scale = (np.asarray(gamma, dtype=dt) / np.sqrt(np.asarray(var, dtype=dt) + dt.type(eps)))
    shift = np.asarray(beta, dtype=dt) - scale * np.asarray(mean, dtype=dt)
    return x * scale[:, None, None] + shift[:, None, None]


def silu(x):
    x = np.asarray(x)
    return x * expit(x)


def relu(x):
    return np.maximum(np.asarray(x), 0)


def bn_silu(x, gamma, beta, mean, var, eps: float = BN_EPS):
    """Batch normalization followed by the SiLU activation."""
    return silu(batch_norm(x, gamma, beta, mean, var, eps))


def global_avg_pool(x) -> np.ndarray:
    """Per-channel spatial mean, shape (C,)."""
    return _check_chw(x).mean(axis=(1, 2))


def se_block(x, w_reduce, w_expand, b_reduce=None, b_expand=None):
    """Squeeze-and-excitation channel gate.

    The pooled vector passes through reduce (C -> C_se) with SiLU, then
    expand (C_se -> C) with a sigmoid; the input is scaled per channel by
    the resulting gate.
    """
    x = _check_chw(x)
    c = x.shape[0]
    wr = np.asarray(w_reduce).reshape(np.asarray(w_reduce).shape[0], -1)
    we = np.asarray(w_expand).reshape(np.asarray(w_expand).shape[0], -1)
    if wr.shape[1] != c:
        raise ValueError(f"reduce weight maps {wr.shape[1]} channels, input has {c}")
    if we.shape != (c, wr.shape[0]):
        raise ValueError(f"expand weight must map {wr.shape[0]} -> {c} channels, got {we.shape}")
    z = global_avg_pool(x)
    hidden = wr.astype(x.dtype) @ z
    if b_reduce is not None:
        hidden = hidden + np.asarray(b_reduce, dtype=x.dtype)
    hidden = silu(hidden)
    gate = we.astype(x.dtype) @ hidden
    if b_expand is not None:
        gate = gate + np.asarray(b_expand, dtype=x.dtype)
    gate = expit(gate)
    return x * gate[:, None, None]


def bilinear_upsample_2x(x):
    """Double both spatial dimensions with bilinear interpolation.

    Output pixel i samples input coordinate (i + 0.5) / 2 - 0.5 clamped to
    the border (half-pixel-center convention, no corner alignment).
    """
    x = _check_chw(x)
    dt = x.dtype

    def axis_taps(n):
        src = np.clip((np.arange(2 * n) + 0.5) / 2.0 - 0.5, 0.0, n - 1.0)
        i0 = np.floor(src).astype(np.intp)
        i1 = np.minimum(i0 + 1, n - 1)
        frac = (src - i0).astype(dt)
        return i0, i1, frac

    r0, r1, fr = axis_taps(x.shape[1])
    c0, c1, fc = axis_taps(x.shape[2])
    rows = x[:, r0, :] * (1 - fr)[None, :, None] + x[:, r1, :] * fr[None, :, None]
    return rows[:, :, c0] * (1 - fc)[None, None, :] + rows[:, :, c1] * fc[None, None, :]


def concat_channels(*tensors) -> np.ndarray:
    tensors = [_check_chw(t) for t in tensors]
    hw = tensors[0].shape[1:]
    for t in tensors[1:]:
        if t.shape[1:] != hw:
            raise ValueError(f"cannot concatenate spatial shapes {hw} and {t.shape[1:]}")
    return np.concatenate(tensors, axis=0)
