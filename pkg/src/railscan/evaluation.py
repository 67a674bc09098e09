"""Segmentation quality metrics: confusion accumulation, per-class IoU, mean
and frequency-weighted IoU, and relative improvement between runs.

UNLABELED ground truth is excluded entirely. A prediction of UNLABELED on a
labeled point is a miss for the ground-truth class: it lands in a dedicated
reject column that counts toward that class's false negatives but toward no
class's false positives.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Optional, Tuple

import numpy as np

from .taxonomy import ClassSet, DEFAULT_CLASSES, UNLABELED_ID

# Marker for classes absent from both ground truth and predictions (their IoU
# is undefined, 0/0) in mappings returned by iou_per_class.
ABSENT = None


@dataclass
class ConfusionMatrix:
    """Square count matrix indexed by raw class id.

    Row = ground-truth class, column = predicted class. Row 0 stays empty
    (UNLABELED ground truth never accumulates); column 0 is the reject column
    for UNLABELED predictions on labeled points.
    """

    classes: ClassSet = field(default_factory=lambda: DEFAULT_CLASSES)
    counts: Optional[np.ndarray] = None
    scans_evaluated: int = 0

    def __post_init__(self):
        size = max(c.id for c in self.classes if c.is_3d) + 1
        if self.counts is None:
            self.counts = np.zeros((size, size), dtype=np.int64)
        else:
            self.counts = np.asarray(self.counts, dtype=np.int64)
            if self.counts.shape != (size, size):
                raise ValueError(
                    f"counts must be {size}x{size}, got {self.counts.shape}"
                )
            if (self.counts < 0).any():
                raise ValueError("counts must be non-negative")
            if self.counts[UNLABELED_ID].any():
                raise ValueError("row 0 must be empty: UNLABELED gt never counts")

    def accumulate(self, gt: np.ndarray, pred: np.ndarray) -> None:
        """Add one scan's point labels. Points with UNLABELED ground truth are
        skipped; lengths must match."""
        gt = np.asarray(gt)
        pred = np.asarray(pred)
        if gt.shape != pred.shape:
            raise ValueError(
                f"gt has {gt.shape[0]} points, predictions {pred.shape[0]}"
            )
        valid_ids = np.array(self.classes.valid_point_label_ids())
        for name, arr in (("gt", gt), ("pred", pred)):
            bad = ~np.isin(arr, valid_ids)
            if bad.any():
                i = int(np.flatnonzero(bad)[0])
                raise ValueError(
                    f"{name} label {int(arr[i])} at point index {i} is not "
                    f"UNLABELED or a 3D class"
                )
        mask = gt != UNLABELED_ID
        n = self.counts.shape[0]
        flat = np.bincount(
            n * gt[mask].astype(np.int64) + pred[mask].astype(np.int64),
            minlength=n * n,
        )
        self.counts += flat.reshape(n, n)
        self.scans_evaluated += 1

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.classes != self.classes:
            raise ValueError("cannot merge confusion matrices over different classes")
        return ConfusionMatrix(
            self.classes,
            self.counts + other.counts,
            self.scans_evaluated + other.scans_evaluated,
        )

    def gt_frequencies(self) -> Dict[int, float]:
        """Share of labeled points per ground-truth class (sums to 1 when any
        labeled point was accumulated)."""
        row = self.counts.sum(axis=1)
        total = row.sum()
        return {
            c: (row[c] / total if total else 0.0)
            for c in range(1, self.counts.shape[0])
        }


def iou_per_class(cm: ConfusionMatrix) -> Dict[int, Optional[float]]:
    """IoU = TP / (TP + FP + FN) per class id.

    The reject column contributes to FN (row sums include it) and to no
    class's FP. Classes with an empty union map to ABSENT, not 0.
    """
    counts = cm.counts
    out: Dict[int, Optional[float]] = {}
    for c in range(1, counts.shape[0]):
        tp = counts[c, c]
        fn = counts[c, :].sum() - tp
        fp = counts[:, c].sum() - tp  # row 0 is empty, so this spans real gt only
        union = tp + fp + fn
        out[c] = ABSENT if union == 0 else float(tp / union)
    return out


def miou(
    ious: Mapping[int, Optional[float]],
    gt_present: Optional[Iterable[int]] = None,
) -> float:
    """Arithmetic mean of IoU over classes that have one (ABSENT excluded,
    zero included).

    gt_present optionally restricts the mean to classes that occur in the
    ground truth, so a class that exists only as false positives (defined
    IoU of 0, but absent from gt) does not drag the mean.
    """
    if gt_present is not None:
        gt_present = set(gt_present)
    present = [
        v
        for c, v in ious.items()
        if v is not None and (gt_present is None or c in gt_present)
    ]
    if not present:
        raise ValueError("mean IoU undefined: no class present")
    return float(np.mean(present))


def fwiou(
    ious: Mapping[int, Optional[float]], frequencies: Mapping[int, float]
) -> float:
    """Frequency-weighted IoU: sum(freq_c * iou_c) / sum(freq_c) over classes
    with a defined IoU and positive frequency."""
    num = 0.0
    den = 0.0
    for c, iou in ious.items():
        f = frequencies.get(c, 0.0)
        if iou is None or f <= 0.0:
            continue
        num += f * iou
        den += f
    if den == 0.0:
        raise ValueError("frequency-weighted IoU undefined: no class present")
    return float(num / den)


def improvement(old: float, new: float) -> float:
    """Relative change (new - old) / old as a percentage."""
    if old == 0:
        raise ValueError("relative improvement undefined for a zero baseline")
    return float((new - old) / old * 100.0)


@dataclass
class IoUReport:
    """Evaluation summary for one labeling run."""

    name: str
    miou: float
    fwiou: float
    per_class: Dict[str, dict]  # class name -> {iou: float|None, gt_frequency}
    confusion: np.ndarray
    scans_evaluated: int

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "miou": self.miou,
            "fwiou": self.fwiou,
            "per_class": self.per_class,
            "confusion": self.confusion.tolist(),
            "scans_evaluated": self.scans_evaluated,
        }


def build_report(cm: ConfusionMatrix, name: str = "run") -> IoUReport:
    ious = iou_per_class(cm)
    freqs = cm.gt_frequencies()
    per_class = {
        cm.classes.by_id(c).name: {
            "iou": ious[c],
            "gt_frequency": float(freqs[c]),
        }
        for c in sorted(ious)
    }
    return IoUReport(
        name=name,
        miou=miou(ious, gt_present={c for c, f in freqs.items() if f > 0}),
        fwiou=fwiou(ious, freqs),
        per_class=per_class,
        confusion=cm.counts.copy(),
        scans_evaluated=cm.scans_evaluated,
    )
