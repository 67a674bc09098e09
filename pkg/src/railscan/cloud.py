"""Point cloud container types and their on-disk binary formats.

Three fixed little-endian formats:

* cloud:        one 20-byte record per point, five float32 values
                (x, y, z, intensity, t_rel). No header.
* labels:       one u32 per point. Bits 0..15 carry the class id, bit 16 the
                provenance flag (0 = AUTO, 1 = CORRECTED), bits 17..31 are
                reserved and must be zero.
* predictions:  8-byte header (u32 n_points, u32 n_classes == 9) followed by a
                row-major float32 matrix of per-class probabilities.

Geometry is float64 in memory (float32 ULP at tens of metres is micrometres,
too coarse for closure checks); files quantize to float32 on save and loads
are exact inverses of saves at byte level.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .taxonomy import ClassSet, DEFAULT_CLASSES, N_CLASSES_3D

CLOUD_RECORD_BYTES = 20
CLOUD_RECORD_DTYPE = np.dtype(
    [("x", "<f4"), ("y", "<f4"), ("z", "<f4"), ("intensity", "<f4"), ("t_rel", "<f4")]
)
LABEL_DTYPE = np.dtype("<u4")
PREDICTION_HEADER_DTYPE = np.dtype("<u4")

PROVENANCE_AUTO = 0
PROVENANCE_CORRECTED = 1

T_REL_MAX = 0.25  # scan period at 4 Hz; per-point times are offsets inside one sweep

PathLike = Union[str, Path]


def _first_bad_index(mask: np.ndarray) -> int:
    return int(np.flatnonzero(mask)[0])


@dataclass
class PointCloud:
    """One LiDAR sweep: positions, return intensity, intra-sweep timestamps.

    xyz is (n, 3) float64 metres in the sensor frame, intensity is unitless in
    [0, 1], t_rel is seconds since sweep start in [0, 0.25).
    """

    scan_id: str
    t_scan: float
    xyz: np.ndarray
    intensity: np.ndarray
    t_rel: np.ndarray

    def __post_init__(self):
        self.xyz = np.asarray(self.xyz, dtype=np.float64).reshape(-1, 3)
        self.intensity = np.asarray(self.intensity, dtype=np.float64).reshape(-1)
        self.t_rel = np.asarray(self.t_rel, dtype=np.float64).reshape(-1)
        self.validate()

    def validate(self):
        n = len(self.xyz)
        if len(self.intensity) != n or len(self.t_rel) != n:
            raise ValueError(
                f"scan {self.scan_id}: field lengths disagree "
                f"({n} xyz, {len(self.intensity)} intensity, {len(self.t_rel)} t_rel)"
            )
        bad = ~np.isfinite(self.xyz).all(axis=1)
        if bad.any():
            raise ValueError(
                f"scan {self.scan_id}: non-finite coordinate at point index "
                f"{_first_bad_index(bad)}"
            )
        bad = ~np.isfinite(self.intensity) | (self.intensity < 0) | (self.intensity > 1)
        if bad.any():
            raise ValueError(
                f"scan {self.scan_id}: intensity outside [0, 1] at point index "
                f"{_first_bad_index(bad)}"
            )
        bad = ~np.isfinite(self.t_rel) | (self.t_rel < 0) | (self.t_rel >= T_REL_MAX)
        if bad.any():
            raise ValueError(
                f"scan {self.scan_id}: t_rel outside [0, {T_REL_MAX}) at point index "
                f"{_first_bad_index(bad)}"
            )

    def __len__(self) -> int:
        return len(self.xyz)

    @property
    def n_points(self) -> int:
        return len(self.xyz)

    def ranges(self) -> np.ndarray:
        """Euclidean distance of every point from the sensor origin."""
        return np.linalg.norm(self.xyz, axis=1)

    def subset(self, mask_or_indices: np.ndarray) -> "PointCloud":
        """New cloud restricted to a boolean mask or index array, order kept."""
        return PointCloud(
            self.scan_id,
            self.t_scan,
            self.xyz[mask_or_indices],
            self.intensity[mask_or_indices],
            self.t_rel[mask_or_indices],
        )


@dataclass
class LabelArray:
    """Per-point class ids plus a provenance flag (AUTO vs CORRECTED)."""

    scan_id: str
    labels: np.ndarray
    provenance: np.ndarray
    classes: ClassSet = field(default=DEFAULT_CLASSES, repr=False)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.uint16).reshape(-1)
        self.provenance = np.asarray(self.provenance, dtype=np.uint8).reshape(-1)
        self.validate()

    def validate(self):
        if len(self.labels) != len(self.provenance):
            raise ValueError(
                f"scan {self.scan_id}: {len(self.labels)} labels but "
                f"{len(self.provenance)} provenance flags"
            )
        allowed = np.array(self.classes.valid_point_label_ids(), dtype=np.uint16)
        bad = ~np.isin(self.labels, allowed)
        if bad.any():
            i = _first_bad_index(bad)
            raise ValueError(
                f"scan {self.scan_id}: label id {int(self.labels[i])} at point index "
                f"{i} is not UNLABELED or a 3D class"
            )
        bad = self.provenance > 1
        if bad.any():
            i = _first_bad_index(bad)
            raise ValueError(
                f"scan {self.scan_id}: provenance flag {int(self.provenance[i])} at "
                f"point index {i} is not 0 or 1"
            )

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, mask_or_indices: np.ndarray) -> "LabelArray":
        return LabelArray(
            self.scan_id,
            self.labels[mask_or_indices],
            self.provenance[mask_or_indices],
            self.classes,
        )

    def copy(self) -> "LabelArray":
        return LabelArray(
            self.scan_id, self.labels.copy(), self.provenance.copy(), self.classes
        )


@dataclass
class PredictionMatrix:
    """Per-point class probabilities over the nine 3D classes.

    Column j holds the probability of class id j + 1 (canonical 3D order).
    Stored float32, matching the file format bit for bit.
    """

    scan_id: str
    probs: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float32).reshape(
            -1, N_CLASSES_3D
        )
        self.validate()

    def validate(self):
        p = self.probs
        if not np.isfinite(p).all():
            i = _first_bad_index(~np.isfinite(p).all(axis=1))
            raise ValueError(f"scan {self.scan_id}: non-finite probability in row {i}")
        bad = (p < 0).any(axis=1) | (p > 1).any(axis=1)
        if bad.any():
            i = _first_bad_index(bad)
            raise ValueError(
                f"scan {self.scan_id}: probability outside [0, 1] in row {i}"
            )
        sums = p.astype(np.float64).sum(axis=1)
        bad = np.abs(sums - 1.0) > 1e-4
        if bad.any():
            i = _first_bad_index(bad)
            raise ValueError(
                f"scan {self.scan_id}: row {i} sums to {sums[i]:.6f}, expected 1 "
                f"within 1e-4"
            )

    def __len__(self) -> int:
        return len(self.probs)

    @property
    def n_points(self) -> int:
        return len(self.probs)

    def argmax_labels(self) -> np.ndarray:
        """Most probable class id per point (ties resolve to the lower id)."""
        return (np.argmax(self.probs, axis=1) + 1).astype(np.uint16)

    def subset(self, mask_or_indices: np.ndarray) -> "PredictionMatrix":
        return PredictionMatrix(self.scan_id, self.probs[mask_or_indices])


# --------------------------------------------------------------------------- io


def load_cloud(
    path: PathLike, scan_id: Optional[str] = None, t_scan: float = 0.0
) -> PointCloud:
    """Parse a cloud file. scan_id/t_scan are sidecar metadata carried by the
    manifest entry; the filename stem is the fallback id."""
    path = Path(path)
    data = path.read_bytes()
    if len(data) % CLOUD_RECORD_BYTES != 0:
        raise ValueError(
            f"{path}: {len(data)} bytes is not a multiple of the "
            f"{CLOUD_RECORD_BYTES}-byte point record"
        )
    rec = np.frombuffer(data, dtype=CLOUD_RECORD_DTYPE)
    xyz = np.column_stack([rec["x"], rec["y"], rec["z"]]).astype(np.float64)
    return PointCloud(
        scan_id=scan_id if scan_id is not None else path.stem,
        t_scan=t_scan,
        xyz=xyz,
        intensity=rec["intensity"].astype(np.float64),
        t_rel=rec["t_rel"].astype(np.float64),
    )


def cloud_to_bytes(cloud: PointCloud) -> bytes:
    cloud.validate()
    rec = np.empty(len(cloud), dtype=CLOUD_RECORD_DTYPE)
    with np.errstate(over="ignore"):  # overflow becomes inf, caught just below
        rec["x"] = cloud.xyz[:, 0]
        rec["y"] = cloud.xyz[:, 1]
        rec["z"] = cloud.xyz[:, 2]
        rec["intensity"] = cloud.intensity
        rec["t_rel"] = cloud.t_rel
    for name in rec.dtype.names:
        if not np.isfinite(rec[name]).all():
            raise ValueError(
                f"scan {cloud.scan_id}: field {name} not representable as float32"
            )
    return rec.tobytes()


def save_cloud(cloud: PointCloud, path: PathLike) -> None:
    Path(path).write_bytes(cloud_to_bytes(cloud))


def labels_from_bytes(
    data: bytes,
    scan_id: str,
    classes: ClassSet = DEFAULT_CLASSES,
    expected_n: Optional[int] = None,
) -> LabelArray:
    if len(data) % LABEL_DTYPE.itemsize != 0:
        raise ValueError(
            f"scan {scan_id}: {len(data)} bytes is not a multiple of the 4-byte label"
        )
    raw = np.frombuffer(data, dtype=LABEL_DTYPE)
    if expected_n is not None and len(raw) != expected_n:
        raise ValueError(
            f"scan {scan_id}: {len(raw)} labels but the referenced cloud has "
            f"{expected_n} points"
        )
    reserved = raw >> 17
    if reserved.any():
        raise ValueError(
            f"scan {scan_id}: reserved label bits set at point index "
            f"{_first_bad_index(reserved != 0)}"
        )
    return LabelArray(
        scan_id=scan_id,
        labels=(raw & 0xFFFF).astype(np.uint16),
        provenance=((raw >> 16) & 1).astype(np.uint8),
        classes=classes,
    )


def load_labels(
    path: PathLike,
    classes: ClassSet = DEFAULT_CLASSES,
    expected_n: Optional[int] = None,
    scan_id: Optional[str] = None,
) -> LabelArray:
    path = Path(path)
    return labels_from_bytes(
        path.read_bytes(),
        scan_id=scan_id if scan_id is not None else path.stem,
        classes=classes,
        expected_n=expected_n,
    )


def labels_to_bytes(arr: LabelArray) -> bytes:
    arr.validate()
    packed = arr.labels.astype(np.uint32) | (arr.provenance.astype(np.uint32) << 16)
    return packed.astype(LABEL_DTYPE).tobytes()


def save_labels(arr: LabelArray, path: PathLike) -> None:
    Path(path).write_bytes(labels_to_bytes(arr))


def predictions_from_bytes(
    data: bytes, scan_id: str, expected_n: Optional[int] = None
) -> PredictionMatrix:
    if len(data) < 8:
        raise ValueError(f"scan {scan_id}: prediction file shorter than its header")
    n_points, n_classes = np.frombuffer(data[:8], dtype=PREDICTION_HEADER_DTYPE)
    if n_classes != N_CLASSES_3D:
        raise ValueError(
            f"scan {scan_id}: prediction header says {n_classes} classes, "
            f"expected {N_CLASSES_3D}"
        )
    expected_bytes = 8 + int(n_points) * N_CLASSES_3D * 4
    if len(data) != expected_bytes:
        raise ValueError(
            f"scan {scan_id}: prediction file is {len(data)} bytes, header implies "
            f"{expected_bytes}"
        )
    if expected_n is not None and int(n_points) != expected_n:
        raise ValueError(
            f"scan {scan_id}: {int(n_points)} prediction rows but the referenced "
            f"cloud has {expected_n} points"
        )
    probs = np.frombuffer(data[8:], dtype="<f4").reshape(int(n_points), N_CLASSES_3D)
    return PredictionMatrix(scan_id=scan_id, probs=probs)


def load_predictions(
    path: PathLike, expected_n: Optional[int] = None, scan_id: Optional[str] = None
) -> PredictionMatrix:
    path = Path(path)
    return predictions_from_bytes(
        path.read_bytes(),
        scan_id=scan_id if scan_id is not None else path.stem,
        expected_n=expected_n,
    )


def predictions_to_bytes(pred: PredictionMatrix) -> bytes:
    pred.validate()
    header = np.array([pred.n_points, N_CLASSES_3D], dtype=PREDICTION_HEADER_DTYPE)
    return header.tobytes() + pred.probs.astype("<f4").tobytes()


def save_predictions(pred: PredictionMatrix, path: PathLike) -> None:
    Path(path).write_bytes(predictions_to_bytes(pred))
