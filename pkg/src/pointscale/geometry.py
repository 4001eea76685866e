"""Coordinate-level kernels: normalization, farthest point sampling, and
the two shape distances used everywhere downstream.

All functions are pure and operate on (n, 3) float64 arrays. Internal
reductions over points run in a storage-order-independent order (sorted
accumulation) so results depend only on the coordinate set, never on how
the points happen to be stored.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DataError
from .validation import check_cloud

EXACT_EMD_CAP = 512

FPS_DETERMINISTIC = "deterministic"
FPS_STOCHASTIC = "stochastic"


@dataclass(frozen=True)
class FpsConfig:
    """Farthest-point-sampling configuration.

    ``deterministic`` mode starts from the point farthest from the
    centroid; ``stochastic`` mode starts from the point maximizing a
    seeded hash of its coordinates, so the randomness lives at the
    coordinate-set level and is independent of storage order. The seed
    is ignored in deterministic mode.
    """

    mode: str = FPS_DETERMINISTIC
    seed: int = 0

    def __post_init__(self):
        if self.mode not in (FPS_DETERMINISTIC, FPS_STOCHASTIC):
            raise DataError(f"unknown FPS mode {self.mode!r}")


def _sorted_order(points: np.ndarray) -> np.ndarray:
    # Lexicographic order on (x, y, z); ties only between exact duplicates.
    return np.lexsort((points[:, 2], points[:, 1], points[:, 0]))


def stable_centroid(points: np.ndarray) -> np.ndarray:
    """Centroid accumulated in sorted coordinate order (bitwise independent
    of storage order)."""
    order = _sorted_order(points)
    return points[order].sum(axis=0) / points.shape[0]


def normalize_cloud(points) -> np.ndarray:
    """Translate the centroid to the origin and scale the farthest point
    to unit norm. Relative geometry is preserved (uniform scale plus
    translation only).

    Raises :class:`DataError` with "zero extent" when all points coincide.
    """
    pts = check_cloud(points)
    centered = pts - stable_centroid(pts)
    radius2 = np.einsum("ij,ij->i", centered, centered).max()
    if radius2 <= 0.0:
        raise DataError("zero extent: all points identical")
    return centered / np.sqrt(radius2)


def pairwise_sqdist(a: np.ndarray, b: np.ndarray, block: int = 512) -> np.ndarray:
    """Squared Euclidean distance matrix, computed per pair so values do
    not depend on blocking or row order."""
    out = np.empty((a.shape[0], b.shape[0]), dtype=np.float64)
    for start in range(0, a.shape[0], block):
        stop = min(start + block, a.shape[0])
        diff = a[start:stop, None, :] - b[None, :, :]
        out[start:stop] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def _lex_smallest(points: np.ndarray, candidates: np.ndarray) -> int:
    sub = points[candidates]
    order = np.lexsort((sub[:, 2], sub[:, 1], sub[:, 0]))
    return int(candidates[order[0]])


def _coordinate_hashes(points: np.ndarray, seed: int) -> np.ndarray:
    """Seeded 64-bit hash of each point's coordinates quantized to 1e-6.

    Identical coordinates always hash identically, so the draw is a
    function of the coordinate set rather than the storage order.
    """
    quantized = np.round(points * 1e6).astype(np.int64)
    key = int(seed).to_bytes(8, "little", signed=False)
    hashes = np.empty(points.shape[0], dtype=np.uint64)
    for i, triple in enumerate(quantized):
        digest = hashlib.blake2b(triple.tobytes(), digest_size=8, key=key).digest()
        hashes[i] = int.from_bytes(digest, "little")
    return hashes


def fps(points, m: int, cfg: FpsConfig = FpsConfig()) -> np.ndarray:
    """Greedy max-min farthest point sampling; returns ``m`` indices.

    Each selected point maximizes the minimum distance to the already
    selected set. All ties break toward the lexicographically smallest
    (x, y, z) triple, so the selected coordinate sequence depends only on
    the coordinate set, never on storage order.
    """
    pts = check_cloud(points)
    n = pts.shape[0]
    if not 1 <= m <= n:
        raise DataError(f"fps requires 1 <= m <= {n}, got m={m}")

    if cfg.mode == FPS_STOCHASTIC:
        hashes = _coordinate_hashes(pts, cfg.seed)
        candidates = np.flatnonzero(hashes == hashes.max())
        first = _lex_smallest(pts, candidates)
    else:
        diff = pts - stable_centroid(pts)
        d2 = np.einsum("ij,ij->i", diff, diff)
        candidates = np.flatnonzero(d2 == d2.max())
        first = _lex_smallest(pts, candidates)

    selected = np.empty(m, dtype=np.int64)
    selected[0] = first
    chosen = np.zeros(n, dtype=bool)
    chosen[first] = True

    diff = pts - pts[first]
    min_d2 = np.einsum("ij,ij->i", diff, diff)
    for step in range(1, m):
        masked = np.where(chosen, -np.inf, min_d2)
        candidates = np.flatnonzero(masked == masked.max())
        nxt = _lex_smallest(pts, candidates)
        selected[step] = nxt
        chosen[nxt] = True
        diff = pts - pts[nxt]
        np.minimum(min_d2, np.einsum("ij,ij->i", diff, diff), out=min_d2)
    return selected


def chamfer(a, b) -> float:
    """Symmetric Chamfer distance with the squared-Euclidean, mean-reduced
    convention:

        CD(a, b) = mean_x min_y ||x - y||^2 + mean_y min_x ||x - y||^2

    Zero exactly when the two clouds are equal as coordinate sets.
    """
    pa = check_cloud(a)
    pb = check_cloud(b)
    d2 = pairwise_sqdist(pa, pb)
    # Sorted accumulation keeps the value independent of storage order.
    term_a = np.sort(d2.min(axis=1)).sum() / pa.shape[0]
    term_b = np.sort(d2.min(axis=0)).sum() / pb.shape[0]
    return float(term_a + term_b)


def emd_exact(a, b, cap: int = EXACT_EMD_CAP) -> float:
    """Exact Earth Mover's Distance between equal-size clouds: the minimum
    over bijections of the mean Euclidean (non-squared) matching cost,
    solved as a linear assignment problem.
    """
    pa = check_cloud(a)
    pb = check_cloud(b)
    if pa.shape[0] != pb.shape[0]:
        raise DataError(f"emd_exact requires equal sizes, got {pa.shape[0]} and {pb.shape[0]}")
    if pa.shape[0] > cap:
        raise DataError(
            f"emd_exact capped at {cap} points (got {pa.shape[0]}); use emd_approx for dense clouds"
        )
    cost = np.sqrt(pairwise_sqdist(pa, pb))
    rows, cols = linear_sum_assignment(cost)
    return float(np.sort(cost[rows, cols]).sum() / pa.shape[0])


class SinkhornResult(NamedTuple):
    value: float
    converged: bool
    iterations: int


def sinkhorn_plan(cost: np.ndarray, epsilon: float, iters: int, tol: float = 1e-9):
    """Log-domain Sinkhorn iterations for uniform marginals.

    Returns ``(plan, converged, iterations)``; ``plan`` is the entropic
    transport plan. Iteration stops early once the row-marginal residual
    drops below ``tol`` (columns are exact after each column update).
    """
    squeeze = cost.ndim == 2
    c = cost[None] if squeeze else cost
    nb, n, m = c.shape
    log_a = -np.log(n)
    log_b = -np.log(m)
    f = np.zeros((nb, n))
    g = np.zeros((nb, m))
    converged = False
    it = 0
    for it in range(1, iters + 1):
        m_fg = (f[:, :, None] + g[:, None, :] - c) / epsilon
        f = f + epsilon * (log_a - _logsumexp(m_fg, axis=2))
        m_fg = (f[:, :, None] + g[:, None, :] - c) / epsilon
        g = g + epsilon * (log_b - _logsumexp(m_fg, axis=1))
        if it % 10 == 0 or it == iters:
            plan = np.exp((f[:, :, None] + g[:, None, :] - c) / epsilon)
            err = np.abs(plan.sum(axis=2) - 1.0 / n).sum(axis=1).max()
            if err < tol:
                converged = True
                break
    plan = np.exp((f[:, :, None] + g[:, None, :] - c) / epsilon)
    if squeeze:
        plan = plan[0]
    return plan, converged, it


def _logsumexp(x: np.ndarray, axis: int) -> np.ndarray:
    hi = x.max(axis=axis, keepdims=True)
    out = np.log(np.exp(x - hi).sum(axis=axis)) + np.squeeze(hi, axis=axis)
    return out


def emd_approx(a, b, epsilon: float = 0.005, iters: int = 500) -> SinkhornResult:
    """Entropic-regularized EMD via Sinkhorn iterations on the Euclidean
    cost matrix. The returned transport cost decreases toward
    :func:`emd_exact` as ``epsilon`` shrinks. A ``converged`` flag of
    False means the marginal residual was still above tolerance after
    ``iters`` iterations and the value is the best available estimate.
    """
    pa = check_cloud(a)
    pb = check_cloud(b)
    if pa.shape[0] != pb.shape[0]:
        raise DataError(f"emd_approx requires equal sizes, got {pa.shape[0]} and {pb.shape[0]}")
    if epsilon <= 0:
        raise DataError("epsilon must be positive")
    if iters < 1:
        raise DataError("iters must be >= 1")
    cost = np.sqrt(pairwise_sqdist(pa, pb))
    plan, converged, it = sinkhorn_plan(cost, epsilon, iters)
    value = float((plan * cost).sum())
    return SinkhornResult(value, converged, it)
