"""Nested coarse-to-fine level-of-detail sequences.

A schedule lists ascending point counts (s_1, ..., s_K) whose consecutive
ratios are integers. The LoD sequence for a cloud is built fine-to-coarse
with farthest point sampling, which guarantees the index sets are nested:
every point present at scale k is also present at scale k+1.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .geometry import FpsConfig, fps
from .validation import check_cloud, check_matrix


@dataclass(frozen=True)
class ScaleSchedule:
    """Ascending point counts per scale with integer upsampling ratios."""

    scales: tuple[int, ...]
    ratios: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        scales = tuple(int(s) for s in self.scales)
        if len(scales) < 1:
            raise DataError("schedule needs at least one scale")
        if scales[0] < 1:
            raise DataError(f"scale counts must be >= 1, got {scales[0]}")
        ratios = []
        for lo, hi in zip(scales, scales[1:]):
            if hi % lo != 0:
                raise DataError(f"scale {hi} is not an integer multiple of {lo}")
            r = hi // lo
            if r < 2:
                raise DataError(f"ratio between {lo} and {hi} must be >= 2, got {r}")
            ratios.append(r)
        object.__setattr__(self, "scales", scales)
        object.__setattr__(self, "ratios", tuple(ratios))

    @property
    def num_scales(self) -> int:
        return len(self.scales)

    @property
    def full_size(self) -> int:
        return self.scales[-1]

    def ratio_to_full(self, k: int) -> int:
        return self.full_size // self.scales[k]

    def truncated(self, k: int) -> "ScaleSchedule":
        """Schedule restricted to the first ``k`` scales (1-indexed)."""
        if not 1 <= k <= self.num_scales:
            raise DataError(f"scale index {k} outside [1, {self.num_scales}]")
        return ScaleSchedule(self.scales[:k])


def build_schedule(n_points: int, spec) -> ScaleSchedule:
    """Build a validated schedule for a cloud of ``n_points``.

    ``spec`` is either an explicit ascending list of scale counts ending
    at ``n_points``, or a pair ``(K, ratio)`` describing a geometric chain
    s_k = n_points / ratio^(K-k).
    """
    if isinstance(spec, tuple) and len(spec) == 2 and all(isinstance(v, int) for v in spec):
        k, ratio = spec
        if k < 1:
            raise DataError("schedule needs K >= 1")
        if ratio < 2:
            raise DataError("ratio must be >= 2")
        scales = []
        s = n_points
        for _ in range(k):
            scales.append(s)
            if s % ratio != 0 and len(scales) < k:
                raise DataError(f"{s} is not divisible by ratio {ratio}")
            s //= ratio
        scales.reverse()
        schedule = ScaleSchedule(tuple(scales))
    else:
        schedule = ScaleSchedule(tuple(int(v) for v in spec))
    if schedule.full_size != n_points:
        raise DataError(
            f"schedule ends at {schedule.full_size} but the cloud has {n_points} points"
        )
    return schedule


@dataclass(frozen=True)
class LoDSequence:
    """Materialized LoD hierarchy for one cloud.

    ``index_sets[k]`` lists row indices into the full cloud for scale k+1
    (selection order preserved); nesting holds as sets:
    indices(k) is a subset of indices(k+1), and the last scale covers the
    whole cloud.
    """

    schedule: ScaleSchedule
    index_sets: tuple[np.ndarray, ...]
    cloud: np.ndarray

    def points_at(self, k: int) -> np.ndarray:
        """Coordinates of scale ``k`` (1-indexed)."""
        return self.cloud[self.index_sets[k - 1]]


def scale_seed(seed: int, *context: int) -> int:
    """Derive a reproducible sub-seed from a base seed and context ids."""
    payload = np.asarray((seed,) + context, dtype=np.int64).tobytes()
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


def sample_lod(cloud, schedule: ScaleSchedule, cfg: FpsConfig = FpsConfig()) -> LoDSequence:
    """Build the LoD sequence fine-to-coarse: starting from the full cloud,
    each coarser scale is an FPS subset of the previous one, which makes
    the hierarchy nested by construction.
    """
    pts = check_cloud(cloud)
    if pts.shape[0] != schedule.full_size:
        raise DataError(
            f"cloud has {pts.shape[0]} points but the schedule expects {schedule.full_size}"
        )
    k = schedule.num_scales
    index_sets: list[np.ndarray] = [np.arange(pts.shape[0], dtype=np.int64)]
    for level in range(k - 2, -1, -1):
        parent = index_sets[0]
        if cfg.mode == "stochastic":
            level_cfg = FpsConfig(cfg.mode, scale_seed(cfg.seed, level))
        else:
            level_cfg = cfg
        local = fps(pts[parent], schedule.scales[level], level_cfg)
        index_sets.insert(0, parent[local])
    return LoDSequence(schedule=schedule, index_sets=tuple(index_sets), cloud=pts)


def query_rows(full_features, lod: LoDSequence, k: int) -> np.ndarray:
    """Gather the rows of ``full_features`` belonging to scale ``k``
    (1-indexed), preserving the LoD selection order."""
    feats = check_matrix(full_features, rows=lod.schedule.full_size, name="full_features")
    if not 1 <= k <= lod.schedule.num_scales:
        raise DataError(f"scale index {k} outside [1, {lod.schedule.num_scales}]")
    return feats[lod.index_sets[k - 1]]
