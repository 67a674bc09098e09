"""Raw sweep preprocessing: sensor-housing reflections, statistical outliers,
camera/LiDAR pairing, and ego-motion de-distortion.

All point-dropping operations return the kept mask alongside the cloud so that
co-registered arrays (labels, predictions) stay index-aligned; composing masks
recovers original indices exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .cloud import PointCloud

DEFAULT_MIN_RANGE = 1.5  # metres; sensor-housing reflections cluster below this
DEFAULT_KNN_K = 8
DEFAULT_KNN_ALPHA = 2.0
DEFAULT_MAX_DT = 0.010  # seconds; scan/image pairs beyond this are dropped
MAX_ABS_SPEED = 60.0  # m/s sanity bound, well above anything a work train does


def filter_reflections(
    cloud: PointCloud, min_range: float = DEFAULT_MIN_RANGE
) -> Tuple[PointCloud, np.ndarray]:
    """Drop points closer to the origin than min_range.

    Points at exactly min_range are retained (closed lower bound on the kept
    side). Returns (filtered cloud, boolean kept mask over the input order).
    """
    if not np.isfinite(min_range) or min_range < 0:
        raise ValueError(f"min_range must be finite and >= 0, got {min_range}")
    kept = cloud.ranges() >= min_range
    return cloud.subset(kept), kept


def knn_mean_distances(xyz: np.ndarray, k: int) -> np.ndarray:
    """Mean Euclidean distance from each point to its k nearest neighbours
    (the point itself excluded)."""
    tree = cKDTree(xyz)
    # query k+1 because the nearest hit of every point is itself at distance 0
    dist, _ = tree.query(xyz, k=k + 1)
    return dist[:, 1:].mean(axis=1)


def remove_outliers(
    cloud: PointCloud, k: int = DEFAULT_KNN_K, alpha: float = DEFAULT_KNN_ALPHA
) -> Tuple[PointCloud, np.ndarray]:
    """Statistical outlier removal over the k-nearest-neighbour distance.

    A point is removed iff its mean distance to its k nearest neighbours
    strictly exceeds mu + alpha * sigma, where mu and sigma are taken over
    that statistic on the whole cloud. Single pass; with sigma == 0 (all
    statistics equal) nothing is removed. Returns (cloud, kept mask).
    """
    n = len(cloud)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if n <= k:
        raise ValueError(f"need more than k={k} points, got {n}")
    if not np.isfinite(alpha):
        raise ValueError(f"alpha must be finite, got {alpha}")
    stat = knn_mean_distances(cloud.xyz, k)
    threshold = stat.mean() + alpha * stat.std()
    kept = stat <= threshold
    return cloud.subset(kept), kept


@dataclass(frozen=True)
class SyncPair:
    scan_id: str
    image_id: str
    dt: float  # t_image - t_scan, signed


def sync_pairs(
    scan_times: Sequence[Tuple[str, float]],
    image_times: Sequence[Tuple[str, float]],
    max_dt: float = DEFAULT_MAX_DT,
) -> List[SyncPair]:
    """Greedy nearest-in-time pairing of scans with camera frames.

    Candidate (scan, image) pairs with |dt| < max_dt (strict) are taken in
    ascending |dt| order, ties broken by scan_id then image_id; each scan and
    each image is used at most once. The result has the greedy optimality
    property: no emitted pair can be swapped for an unmatched candidate with
    smaller |dt|. Output is sorted by scan time.
    """
    if not np.isfinite(max_dt) or max_dt <= 0:
        raise ValueError(f"max_dt must be finite and > 0, got {max_dt}")
    for sid, t in list(scan_times) + list(image_times):
        if not np.isfinite(t):
            raise ValueError(f"non-finite timestamp for {sid!r}")
    if len({s for s, _ in scan_times}) != len(scan_times):
        raise ValueError("duplicate scan_id in scan_times")
    if len({i for i, _ in image_times}) != len(image_times):
        raise ValueError("duplicate image_id in image_times")

    img_ids = [i for i, _ in image_times]
    img_t = np.array([t for _, t in image_times], dtype=np.float64)
    order = np.argsort(img_t, kind="stable")
    img_ids = [img_ids[j] for j in order]
    img_t = img_t[order]

    candidates = []
    for sid, ts in scan_times:
        lo = np.searchsorted(img_t, ts - max_dt, side="left")
        hi = np.searchsorted(img_t, ts + max_dt, side="right")
        for j in range(int(lo), int(hi)):
            dt = img_t[j] - ts
            if abs(dt) < max_dt:
                candidates.append((abs(dt), sid, img_ids[j], dt))
    candidates.sort(key=lambda c: (c[0], c[1], c[2]))

    scan_used, img_used = set(), set()
    pairs = []
    for _, sid, iid, dt in candidates:
        if sid in scan_used or iid in img_used:
            continue
        scan_used.add(sid)
        img_used.add(iid)
        pairs.append(SyncPair(sid, iid, float(dt)))

    by_time = {s: t for s, t in scan_times}
    pairs.sort(key=lambda p: (by_time[p.scan_id], p.scan_id))
    return pairs


@dataclass(frozen=True)
class MotionParams:
    """Ego-motion during one sweep: unit travel direction and signed speed.

    Positive speed shifts points forward along travel_dir proportionally to
    their intra-sweep timestamp; a negative speed reverses the shift, so
    correcting with v and then -v is an exact inverse. |speed| is bounded by
    MAX_ABS_SPEED as a sanity check.
    """

    travel_dir: Tuple[float, float, float]
    v_current: float

    def __post_init__(self):
        d = np.asarray(self.travel_dir, dtype=np.float64)
        if d.shape != (3,) or not np.isfinite(d).all():
            raise ValueError("travel_dir must be a finite 3-vector")
        norm = float(np.linalg.norm(d))
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"travel_dir must be unit length, |d| = {norm:.12f}")
        if not np.isfinite(self.v_current) or abs(self.v_current) > MAX_ABS_SPEED:
            raise ValueError(
                f"v_current must be within [-{MAX_ABS_SPEED}, {MAX_ABS_SPEED}] m/s, "
                f"got {self.v_current}"
            )

    @property
    def direction(self) -> np.ndarray:
        return np.asarray(self.travel_dir, dtype=np.float64)


def motion_correct(cloud: PointCloud, params: MotionParams) -> PointCloud:
    """Undo ego-motion smear inside one sweep.

    Every point recorded t_rel seconds into the sweep is moved forward by
    t_rel * v_current metres along the travel direction, referencing all
    points to the sweep start pose. Linear in v_current; v_current == 0 is
    the identity. Intensity, t_rel and point order are unchanged.
    """
    offset = (cloud.t_rel * params.v_current)[:, None] * params.direction[None, :]
    return PointCloud(
        cloud.scan_id,
        cloud.t_scan,
        cloud.xyz + offset,
        cloud.intensity,
        cloud.t_rel,
    )


def compose_masks(outer: np.ndarray, inner: np.ndarray) -> np.ndarray:
    """Combine kept masks from chained filters into one mask over the original
    indices: outer was applied first, inner to the survivors."""
    outer = np.asarray(outer, dtype=bool)
    inner = np.asarray(inner, dtype=bool)
    if inner.shape[0] != int(outer.sum()):
        raise ValueError(
            f"inner mask covers {inner.shape[0]} points but outer kept {int(outer.sum())}"
        )
    combined = np.zeros_like(outer)
    combined[np.flatnonzero(outer)[inner]] = True
    return combined
