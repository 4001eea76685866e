"""Permutation-equivariant per-point feature extraction.

A shared point-wise MLP interleaved with k-nearest-neighbor max-pooling
plus a global max-pooled context vector. Every operation is row-wise or
an order-free max over a canonically ordered neighbor set, so permuting
the input rows permutes the output rows exactly, with no other change.

Neighbor sets are derived from coordinates only: candidates sort by
(squared distance, then lexicographic coordinate), which makes the
neighborhood of a point independent of storage order even under
distance ties.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ParameterStore, Tensor
from .errors import DataError, NumericError
from .geometry import pairwise_sqdist
from .validation import check_cloud


@dataclass(frozen=True)
class EncoderConfig:
    feature_dim: int = 64
    layers: int = 4
    knn: int = 8


def knn_indices(points: np.ndarray, k: int) -> np.ndarray:
    """(n, k) neighbor indices per point, self excluded, ordered by
    (distance, lexicographic coordinate)."""
    n = points.shape[0]
    if n <= k:
        raise DataError(f"k-NN undefined: cloud has {n} points but k={k}")
    d2 = pairwise_sqdist(points, points)
    out = np.empty((n, k), dtype=np.int64)
    xs, ys, zs = points[:, 0], points[:, 1], points[:, 2]
    for i in range(n):
        order = np.lexsort((zs, ys, xs, d2[i]))
        order = order[order != i]
        out[i] = order[:k]
    return out


def neighborhood_max(features: Tensor, neighbor_idx: np.ndarray) -> Tensor:
    """Channel-wise max over each row's neighbor set.

    Backward routes gradients to the first maximizing neighbor in the
    canonical neighbor order.
    """
    idx = np.asarray(neighbor_idx, dtype=np.int64)
    if idx.ndim != 2 or idx.shape[0] != features.shape[0]:
        raise NumericError("neighbor index table must be (n, k)")
    gathered = features.values[idx]  # (n, k, d)
    values = gathered.max(axis=1)
    arg = gathered.argmax(axis=1)  # (n, d), first max wins

    n, d = values.shape
    winner_rows = idx[np.arange(n)[:, None], arg]
    cols = np.broadcast_to(np.arange(d), (n, d))

    def backward(g):
        full = np.zeros_like(features.values)
        np.add.at(full, (winner_rows.ravel(), cols.ravel()), g.ravel())
        return (full,)

    return ad.make_op(values, (features,), backward, "neighborhood_max")


def rows_max(features: Tensor) -> Tensor:
    """Global max-pool over rows, keeping a (1, d) shape."""
    values = features.values.max(axis=0, keepdims=True)
    arg = features.values.argmax(axis=0)
    d = features.shape[1]

    def backward(g):
        full = np.zeros_like(features.values)
        np.add.at(full, (arg, np.arange(d)), g[0])
        return (full,)

    return ad.make_op(values, (features,), backward, "rows_max")


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    return rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in)


def init_encoder_params(
    store: ParameterStore, cfg: EncoderConfig, rng: np.random.Generator, prefix: str = "encoder."
):
    d = cfg.feature_dim
    store.add(f"{prefix}in.w", _glorot(rng, 3, d))
    store.add(f"{prefix}in.b", np.zeros(d))
    for layer in range(cfg.layers):
        store.add(f"{prefix}blk{layer}.w", _glorot(rng, d, d))
        store.add(f"{prefix}blk{layer}.b", np.zeros(d))
        store.add(f"{prefix}blk{layer}.w_self", _glorot(rng, d, d))
        store.add(f"{prefix}blk{layer}.w_nbr", _glorot(rng, d, d))
        store.add(f"{prefix}blk{layer}.b_out", np.zeros(d))
    store.add(f"{prefix}out.w_self", _glorot(rng, d, d))
    store.add(f"{prefix}out.w_global", _glorot(rng, d, d))
    store.add(f"{prefix}out.b", np.zeros(d))


def encode_features(
    points, store: ParameterStore, cfg: EncoderConfig, prefix: str = "encoder."
) -> Tensor:
    """Map an (n, 3) cloud to (n, feature_dim) per-point features.

    Row i depends on point i, its k-NN neighborhood, and the globally
    max-pooled context only; the map is differentiable w.r.t. the
    encoder parameters.
    """
    pts = check_cloud(points)
    idx = knn_indices(pts, cfg.knn)
    coords = ad.constant(pts)

    h = ad.gelu(ad.add(ad.matmul(coords, store[f"{prefix}in.w"]), store[f"{prefix}in.b"]))
    for layer in range(cfg.layers):
        u = ad.gelu(
            ad.add(ad.matmul(h, store[f"{prefix}blk{layer}.w"]), store[f"{prefix}blk{layer}.b"])
        )
        pooled = neighborhood_max(u, idx)
        mixed = ad.add(
            ad.add(
                ad.matmul(u, store[f"{prefix}blk{layer}.w_self"]),
                ad.matmul(pooled, store[f"{prefix}blk{layer}.w_nbr"]),
            ),
            store[f"{prefix}blk{layer}.b_out"],
        )
        h = ad.add(h, ad.gelu(mixed))

    context = ad.duplicate_reshape_upsample(rows_max(h), pts.shape[0])
    out = ad.add(
        ad.add(
            ad.matmul(h, store[f"{prefix}out.w_self"]),
            ad.matmul(context, store[f"{prefix}out.w_global"]),
        ),
        store[f"{prefix}out.b"],
    )
    return out
