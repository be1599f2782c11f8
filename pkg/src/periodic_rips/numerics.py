"""Order-canonical floating point reductions.

Message aggregation and pooling sum multisets of values whose natural
iteration order depends on how atoms happen to be numbered. Sorting every
channel before a fixed pairwise tree reduction makes each reduction a pure
function of the value multiset, so relabeling atoms (or shuffling neighbor
iteration order) cannot perturb even the low-order bits of the result.

All helpers optionally propagate a tangent array (forward-mode directional
derivative) alongside the value array; pass ``None`` to skip tangent math.
"""

from __future__ import annotations

import numpy as np


def tree_sum(x: np.ndarray, axis: int = 0) -> np.ndarray:
    """Sum along ``axis`` with a fixed pairwise (binary tree) reduction."""
    x = np.moveaxis(np.asarray(x), axis, 0)
    n = x.shape[0]
    if n == 0:
        return np.zeros(x.shape[1:], dtype=x.dtype if x.dtype.kind == "f" else np.float64)
    while n > 1:
        half = n // 2
        paired = x[: 2 * half : 2] + x[1 : 2 * half : 2]
        if n % 2:
            x = np.concatenate([paired, x[2 * half :]], axis=0)
        else:
            x = paired
        n = x.shape[0]
    return x[0]


def sorted_tree_sum(x: np.ndarray, axis: int = 0) -> np.ndarray:
    """Tree-sum after sorting each channel, canonical w.r.t. input order."""
    x = np.moveaxis(np.asarray(x), axis, 0)
    return tree_sum(np.sort(x, axis=0, kind="stable"), axis=0)


def sorted_mean(x: np.ndarray, axis: int = 0) -> np.ndarray:
    x = np.moveaxis(np.asarray(x), axis, 0)
    n = x.shape[0]
    if n == 0:
        raise ValueError("mean of empty array")
    return sorted_tree_sum(x, axis=0) / n


def pooled_mean(
    values: np.ndarray, tangents: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray | None]:
    """Row mean with per-channel value sorting; tangents ride along the
    same permutation so the derivative matches the primal reduction."""
    values = np.asarray(values)
    n = values.shape[0]
    if n == 0:
        raise ValueError("mean of empty array")
    order = np.argsort(values, axis=0, kind="stable")
    out = tree_sum(np.take_along_axis(values, order, axis=0), axis=0) / n
    dout = None
    if tangents is not None:
        dout = tree_sum(np.take_along_axis(np.asarray(tangents), order, axis=0), axis=0) / n
    return out, dout


def softmax_aggregate(
    values: np.ndarray, tangents: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray | None]:
    """Channel-wise softmax-weighted sum over the leading axis.

    For each channel c the output is sum_i p_i * v_i with
    p = softmax(values[:, c]) at unit temperature. An empty leading axis
    aggregates to the zero vector. Channels are value-sorted before the
    reduction (see module docstring).
    """
    values = np.asarray(values, dtype=np.float64)
    m = values.shape[0]
    channel_shape = values.shape[1:]
    if m == 0:
        out = np.zeros(channel_shape)
        return out, (np.zeros(channel_shape) if tangents is not None else None)

    flat = values.reshape(m, -1)
    order = np.argsort(flat, axis=0, kind="stable")
    v = np.take_along_axis(flat, order, axis=0)
    # max is the last row after ascending sort
    e = np.exp(v - v[-1])
    z = tree_sum(e, axis=0)
    p = e / z
    out = tree_sum(p * v, axis=0)

    dout = None
    if tangents is not None:
        dv = np.take_along_axis(np.asarray(tangents, dtype=np.float64).reshape(m, -1), order, axis=0)
        s1 = tree_sum(p * dv, axis=0)
        t1 = tree_sum(p * dv * v, axis=0)
        # d(sum p_i v_i) with dp_i = p_i (dv_i - sum_j p_j dv_j)
        dout = (t1 - s1 * out + s1).reshape(channel_shape)
    return out.reshape(channel_shape), dout
