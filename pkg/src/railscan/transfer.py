"""Transfer of camera segmentation labels onto LiDAR points, plus the
bookkeeping for human corrections.

Transfer samples the nearest pixel for every point with a valid projection.
Occlusion is deliberately not handled: a point behind a foreground object
samples the foreground pixel, which is exactly the edge-mislabeling failure
mode the correction workflow exists to fix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from .camera import CameraCalibration, LabelImage, nearest_pixel, project_points
from .cloud import LabelArray, PointCloud, PROVENANCE_AUTO, PROVENANCE_CORRECTED
from .taxonomy import ClassSet, DEFAULT_CLASSES, DEFAULT_CLASS_MAP, UNLABELED_ID


def _pixel_to_point_class(
    classes: ClassSet, class_map: Mapping[str, str]
) -> np.ndarray:
    """256-entry lookup from pixel class id to point class id."""
    lut = np.zeros(256, dtype=np.uint16)
    for c in classes:
        target_name = class_map.get(c.name, "UNLABELED" if not c.is_3d else c.name)
        target = classes.by_name(target_name)
        if target.is_3d or target.id == UNLABELED_ID:
            lut[c.id] = target.id
        else:
            raise ValueError(
                f"class map sends {c.name} to image-only class {target.name}"
            )
    return lut


def transfer_labels(
    cloud: PointCloud,
    label_image: LabelImage,
    calib: CameraCalibration,
    class_map: Mapping[str, str] = DEFAULT_CLASS_MAP,
) -> LabelArray:
    """Label every point from the segmentation image.

    Points with a valid projection take the class of their nearest pixel
    (image-only classes collapse through class_map, default to UNLABELED);
    points without one stay UNLABELED. All provenance flags are AUTO.
    """
    if not label_image.matches(calib):
        raise ValueError(
            f"image {label_image.image_id} is {label_image.width}x"
            f"{label_image.height}, calibration says {calib.width}x{calib.height}"
        )
    u, v, valid = project_points(cloud.xyz, calib)
    labels = np.full(len(cloud), UNLABELED_ID, dtype=np.uint16)
    if valid.any():
        px = nearest_pixel(u[valid], calib.width)
        py = nearest_pixel(v[valid], calib.height)
        lut = _pixel_to_point_class(label_image.classes, class_map)
        labels[valid] = lut[label_image.pixels[py, px]]
    return LabelArray(
        scan_id=cloud.scan_id,
        labels=labels,
        provenance=np.full(len(cloud), PROVENANCE_AUTO, dtype=np.uint8),
        classes=label_image.classes,
    )


@dataclass(frozen=True)
class Correction:
    point_index: int
    new_class_id: int
    author: str
    timestamp: float  # seconds, epoch


@dataclass
class CorrectionSet:
    """Human relabels for one scan.

    Entries are resolved at construction: sorted by timestamp, later entries
    win; a timestamp tie resolves to the later list position. After
    construction there is at most one entry per point index.
    """

    scan_id: str
    corrections: List[Correction] = field(default_factory=list)

    def __post_init__(self):
        resolved: Dict[int, Correction] = {}
        for c in sorted(
            enumerate(self.corrections), key=lambda ic: (ic[1].timestamp, ic[0])
        ):
            entry = c[1]
            if entry.point_index < 0:
                raise ValueError(
                    f"scan {self.scan_id}: negative point index {entry.point_index}"
                )
            resolved[entry.point_index] = entry
        self.corrections = [resolved[i] for i in sorted(resolved)]

    def __len__(self) -> int:
        return len(self.corrections)

    def to_dicts(self) -> List[dict]:
        return [
            {
                "point_index": c.point_index,
                "new_class_id": c.new_class_id,
                "author": c.author,
                "timestamp": c.timestamp,
            }
            for c in self.corrections
        ]

    @staticmethod
    def from_dicts(scan_id: str, rows) -> "CorrectionSet":
        return CorrectionSet(
            scan_id,
            [
                Correction(
                    int(r["point_index"]),
                    int(r["new_class_id"]),
                    str(r.get("author", "")),
                    float(r["timestamp"]),
                )
                for r in rows
            ],
        )


def apply_corrections(labels: LabelArray, corrections: CorrectionSet) -> LabelArray:
    """Apply human relabels on top of a label array.

    Corrected points take new_class_id with provenance CORRECTED; everything
    else is untouched. Indices must address the scan and class ids must be
    UNLABELED or a 3D class.
    """
    if corrections.scan_id != labels.scan_id:
        raise ValueError(
            f"corrections for scan {corrections.scan_id} applied to scan "
            f"{labels.scan_id}"
        )
    out = labels.copy()
    n = len(out)
    allowed = set(labels.classes.valid_point_label_ids())
    for c in corrections.corrections:
        if c.point_index >= n:
            raise IndexError(
                f"scan {labels.scan_id}: correction index {c.point_index} out of "
                f"range for {n} points"
            )
        if c.new_class_id not in allowed:
            raise ValueError(
                f"scan {labels.scan_id}: corrected class id {c.new_class_id} is "
                f"not UNLABELED or a 3D class"
            )
        out.labels[c.point_index] = c.new_class_id
        out.provenance[c.point_index] = PROVENANCE_CORRECTED
    return out


def label_status(labels: LabelArray) -> Dict[str, int]:
    """Provenance and coverage counts.

    auto_count + corrected_count always equals the point count (provenance is
    a partition); unlabeled_count tallies points whose class is UNLABELED,
    whatever their provenance.
    """
    auto = int((labels.provenance == PROVENANCE_AUTO).sum())
    corrected = int((labels.provenance == PROVENANCE_CORRECTED).sum())
    unlabeled = int((labels.labels == UNLABELED_ID).sum())
    return {
        "auto_count": auto,
        "corrected_count": corrected,
        "unlabeled_count": unlabeled,
    }
