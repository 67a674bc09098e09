"""Dataset manifest: scan inventory, statuses, and iteration history.

The manifest is a single JSON file at the dataset root. Every path inside
it is relative to that root, so a dataset directory can be moved or
mounted somewhere else without rewriting anything.
"""

from __future__ import annotations

import enum
import json
import math
import os
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Union

from .camera import CameraCalibration, LabelImage, load_label_image
from .cloud import (
    LabelArray,
    PointCloud,
    PredictionMatrix,
    load_cloud,
    load_labels,
    load_predictions,
)
from .preprocess import MAX_ABS_SPEED
from .taxonomy import DEFAULT_CLASS_MAP, DEFAULT_CLASSES, ClassSet

PathLike = Union[str, Path]

MANIFEST_VERSION = 1


class ScanStatus(enum.Enum):
    RAW = "RAW"
    COARSE = "COARSE"
    PENDING_ANNOTATION = "PENDING_ANNOTATION"
    CORRECTED = "CORRECTED"
    TEST = "TEST"


# Forward order of the annotation workflow. TEST is deliberately absent:
# it is an island assigned at registration and never entered or left.
_STATUS_ORDER = {
    ScanStatus.RAW: 0,
    ScanStatus.COARSE: 1,
    ScanStatus.PENDING_ANNOTATION: 2,
    ScanStatus.CORRECTED: 3,
}


def _check_relative(path: str, what: str) -> str:
    p = Path(path)
    if p.is_absolute() or ".." in p.parts:
        raise ValueError(
            f"{what} path {path!r} must be relative to the dataset root "
            "and must not escape it"
        )
    return str(path)


@dataclass
class ScanEntry:
    """One scan's row in the inventory.

    ``cloud``, ``labels`` and ``prediction`` are root-relative file paths;
    the latter two stay None until the pipeline produces them. ``sync_dt``
    is t_image - t_scan for the paired image, if any.
    """

    scan_id: str
    cloud: str
    t_scan: float
    v_current: float
    n_points: int
    status: ScanStatus
    image_id: Optional[str] = None
    sync_dt: Optional[float] = None
    labels: Optional[str] = None
    prediction: Optional[str] = None

    def validate(self) -> None:
        if not self.scan_id:
            raise ValueError("scan_id must be a non-empty string")
        _check_relative(self.cloud, f"scan {self.scan_id}: cloud")
        if self.labels is not None:
            _check_relative(self.labels, f"scan {self.scan_id}: labels")
        if self.prediction is not None:
            _check_relative(self.prediction, f"scan {self.scan_id}: prediction")
        if not math.isfinite(self.t_scan):
            raise ValueError(f"scan {self.scan_id}: t_scan must be finite")
        if not math.isfinite(self.v_current) or abs(self.v_current) > MAX_ABS_SPEED:
            raise ValueError(
                f"scan {self.scan_id}: v_current must be finite with "
                f"|v| <= {MAX_ABS_SPEED}"
            )
        if self.n_points < 0:
            raise ValueError(f"scan {self.scan_id}: n_points must be >= 0")
        if (self.image_id is None) != (self.sync_dt is None):
            raise ValueError(
                f"scan {self.scan_id}: image_id and sync_dt must be set together"
            )

    def to_dict(self) -> dict:
        return {
            "scan_id": self.scan_id,
            "cloud": self.cloud,
            "t_scan": self.t_scan,
            "v_current": self.v_current,
            "n_points": self.n_points,
            "status": self.status.value,
            "image_id": self.image_id,
            "sync_dt": self.sync_dt,
            "labels": self.labels,
            "prediction": self.prediction,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScanEntry":
        entry = cls(
            scan_id=d["scan_id"],
            cloud=d["cloud"],
            t_scan=float(d["t_scan"]),
            v_current=float(d["v_current"]),
            n_points=int(d["n_points"]),
            status=ScanStatus(d["status"]),
            image_id=d.get("image_id"),
            sync_dt=None if d.get("sync_dt") is None else float(d["sync_dt"]),
            labels=d.get("labels"),
            prediction=d.get("prediction"),
        )
        entry.validate()
        return entry


@dataclass
class ImageEntry:
    image_id: str
    t_image: float
    label_image: str

    def validate(self) -> None:
        if not self.image_id:
            raise ValueError("image_id must be a non-empty string")
        if not math.isfinite(self.t_image):
            raise ValueError(f"image {self.image_id}: t_image must be finite")
        _check_relative(self.label_image, f"image {self.image_id}: label_image")

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "t_image": self.t_image,
            "label_image": self.label_image,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ImageEntry":
        entry = cls(
            image_id=d["image_id"],
            t_image=float(d["t_image"]),
            label_image=d["label_image"],
        )
        entry.validate()
        return entry


class DatasetManifest:
    """In-memory view of the manifest file plus its transition log.

    Status changes go through :meth:`set_status`, which enforces the
    forward-only workflow order and records every change with a timestamp;
    replaying the log reproduces the current statuses exactly, which
    :meth:`check_transitions` verifies and :meth:`load` enforces.
    """

    def __init__(
        self,
        root: PathLike,
        calibration: Optional[CameraCalibration] = None,
        class_map: Optional[Dict[str, str]] = None,
        classes: ClassSet = DEFAULT_CLASSES,
    ):
        self.root = Path(root)
        self.calibration = calibration
        self.class_map = dict(DEFAULT_CLASS_MAP if class_map is None else class_map)
        self.classes = classes
        self.scans: Dict[str, ScanEntry] = {}
        self.images: Dict[str, ImageEntry] = {}
        self.al_iterations: List[dict] = []
        self.transitions: List[dict] = []
        self.path: Optional[Path] = None

    # -- inventory ---------------------------------------------------------

    def add_scan(self, entry: ScanEntry, at: Optional[float] = None) -> None:
        entry.validate()
        if entry.scan_id in self.scans:
            raise ValueError(f"duplicate scan_id {entry.scan_id!r}")
        if entry.image_id is not None and entry.image_id not in self.images:
            raise ValueError(
                f"scan {entry.scan_id} references unknown image {entry.image_id!r}"
            )
        self.scans[entry.scan_id] = entry
        # Registration is itself a recorded transition (from nothing), so
        # the log alone reconstructs all statuses.
        self.transitions.append(
            {
                "scan_id": entry.scan_id,
                "from": None,
                "to": entry.status.value,
                "at": time.time() if at is None else at,
            }
        )

    def add_image(self, entry: ImageEntry) -> None:
        entry.validate()
        if entry.image_id in self.images:
            raise ValueError(f"duplicate image_id {entry.image_id!r}")
        self.images[entry.image_id] = entry

    def scan(self, scan_id: str) -> ScanEntry:
        try:
            return self.scans[scan_id]
        except KeyError:
            raise KeyError(f"unknown scan {scan_id!r}") from None

    def image(self, image_id: str) -> ImageEntry:
        try:
            return self.images[image_id]
        except KeyError:
            raise KeyError(f"unknown image {image_id!r}") from None

    def scan_ids_by_status(self, *statuses: ScanStatus) -> List[str]:
        wanted = set(statuses)
        return [s.scan_id for s in self.scans.values() if s.status in wanted]

    # -- workflow ----------------------------------------------------------

    def set_status(
        self, scan_id: str, status: ScanStatus, at: Optional[float] = None
    ) -> None:
        entry = self.scan(scan_id)
        old = entry.status
        if old is ScanStatus.TEST or status is ScanStatus.TEST:
            raise ValueError(
                f"scan {scan_id}: TEST is assigned at registration only; "
                f"refusing {old.value} -> {status.value}"
            )
        if _STATUS_ORDER[status] <= _STATUS_ORDER[old]:
            raise ValueError(
                f"scan {scan_id}: status can only move forward, "
                f"not {old.value} -> {status.value}"
            )
        entry.status = status
        self.transitions.append(
            {
                "scan_id": scan_id,
                "from": old.value,
                "to": status.value,
                "at": time.time() if at is None else at,
            }
        )

    def set_sync(self, scan_id: str, image_id: str, dt: float) -> None:
        entry = self.scan(scan_id)
        self.image(image_id)
        if not math.isfinite(dt):
            raise ValueError(f"scan {scan_id}: sync_dt must be finite")
        entry.image_id = image_id
        entry.sync_dt = dt

    def set_labels(self, scan_id: str, relpath: str) -> None:
        self.scan(scan_id).labels = _check_relative(
            relpath, f"scan {scan_id}: labels"
        )

    def set_prediction(self, scan_id: str, relpath: str) -> None:
        self.scan(scan_id).prediction = _check_relative(
            relpath, f"scan {scan_id}: prediction"
        )

    def next_iteration(self) -> int:
        return 1 + max((int(it["iteration"]) for it in self.al_iterations), default=0)

    def check_transitions(self) -> None:
        """Verify that replaying the transition log reproduces the current
        statuses. Raises on any divergence or malformed chain."""
        chains: Dict[str, List[dict]] = {}
        for tr in self.transitions:
            sid = tr["scan_id"]
            if sid not in self.scans:
                raise ValueError(f"transition log references unknown scan {sid!r}")
            chains.setdefault(sid, []).append(tr)
        for sid, entry in self.scans.items():
            chain = chains.get(sid, [])
            if not chain:
                raise ValueError(f"scan {sid}: no registration transition in log")
            if chain[0]["from"] is not None:
                raise ValueError(
                    f"scan {sid}: first transition must come from registration"
                )
            state = ScanStatus(chain[0]["to"])
            for tr in chain[1:]:
                if ScanStatus(tr["from"]) is not state:
                    raise ValueError(
                        f"scan {sid}: broken transition chain at "
                        f"{tr['from']} -> {tr['to']}"
                    )
                nxt = ScanStatus(tr["to"])
                if state is ScanStatus.TEST or nxt is ScanStatus.TEST:
                    raise ValueError(f"scan {sid}: TEST cannot appear mid-chain")
                if _STATUS_ORDER[nxt] <= _STATUS_ORDER[state]:
                    raise ValueError(
                        f"scan {sid}: non-forward transition "
                        f"{state.value} -> {nxt.value} in log"
                    )
                state = nxt
            if state is not entry.status:
                raise ValueError(
                    f"scan {sid}: log replays to {state.value} but manifest "
                    f"says {entry.status.value}"
                )

    # -- file access -------------------------------------------------------

    def resolve(self, relpath: str) -> Path:
        return self.root / relpath

    def load_scan_cloud(self, scan_id: str) -> PointCloud:
        entry = self.scan(scan_id)
        cloud = load_cloud(
            self.resolve(entry.cloud), scan_id=scan_id, t_scan=entry.t_scan
        )
        if cloud.n_points != entry.n_points:
            raise ValueError(
                f"scan {scan_id}: manifest says {entry.n_points} points but "
                f"{entry.cloud} holds {cloud.n_points}"
            )
        return cloud

    def load_scan_labels(
        self, scan_id: str, allow_test: bool = False
    ) -> LabelArray:
        entry = self.scan(scan_id)
        if entry.status is ScanStatus.TEST and not allow_test:
            raise ValueError(
                f"scan {scan_id} is in the held-out test split; its labels "
                "are only readable during evaluation"
            )
        if entry.labels is None:
            raise ValueError(f"scan {scan_id} has no label file yet")
        return load_labels(
            self.resolve(entry.labels),
            classes=self.classes,
            expected_n=entry.n_points,
            scan_id=scan_id,
        )

    def load_scan_predictions(self, scan_id: str) -> PredictionMatrix:
        entry = self.scan(scan_id)
        if entry.prediction is None:
            raise ValueError(f"scan {scan_id} has no prediction file yet")
        return load_predictions(
            self.resolve(entry.prediction),
            expected_n=entry.n_points,
            scan_id=scan_id,
        )

    def load_image(self, image_id: str) -> LabelImage:
        entry = self.image(image_id)
        return load_label_image(
            self.resolve(entry.label_image),
            classes=self.classes,
            image_id=image_id,
        )

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "version": MANIFEST_VERSION,
            "root": ".",
            "calibration": None
            if self.calibration is None
            else self.calibration.to_dict(),
            "class_map": {str(k): str(v) for k, v in self.class_map.items()},
            "scans": [s.to_dict() for s in self.scans.values()],
            "images": [i.to_dict() for i in self.images.values()],
            "al_iterations": self.al_iterations,
            "transitions": self.transitions,
        }

    def save(self, path: Optional[PathLike] = None) -> Path:
        """Atomically write the manifest. A crash mid-write leaves the old
        file untouched: the payload lands in a temp file first, is fsynced,
        and only then renamed over the target."""
        if path is None:
            path = self.path
        if path is None:
            raise ValueError("manifest has no bound path; pass one to save()")
        path = Path(path)
        payload = json.dumps(self.to_dict(), indent=2).encode("utf-8")
        fd, tmp = tempfile.mkstemp(
            dir=path.parent, prefix=path.name + ".", suffix=".tmp"
        )
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(payload)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, path)
        except BaseException:
            try:
                os.unlink(tmp)
            except OSError:
                pass
            raise
        self.path = path
        return path

    @classmethod
    def from_dict(cls, d: dict, root: PathLike) -> "DatasetManifest":
        version = d.get("version")
        if version != MANIFEST_VERSION:
            raise ValueError(
                f"unsupported manifest version {version!r}, "
                f"expected {MANIFEST_VERSION}"
            )
        calib = d.get("calibration")
        m = cls(
            root=root,
            calibration=None if calib is None else CameraCalibration.from_dict(calib),
            class_map={str(k): str(v) for k, v in d.get("class_map", {}).items()},
        )
        for img in d.get("images", []):
            m.add_image(ImageEntry.from_dict(img))
        for sc in d.get("scans", []):
            entry = ScanEntry.from_dict(sc)
            if entry.scan_id in m.scans:
                raise ValueError(f"duplicate scan_id {entry.scan_id!r}")
            if entry.image_id is not None and entry.image_id not in m.images:
                raise ValueError(
                    f"scan {entry.scan_id} references unknown image "
                    f"{entry.image_id!r}"
                )
            m.scans[entry.scan_id] = entry
        m.al_iterations = list(d.get("al_iterations", []))
        m.transitions = list(d.get("transitions", []))
        m.check_transitions()
        return m

    @classmethod
    def load(cls, path: PathLike) -> "DatasetManifest":
        path = Path(path)
        with open(path, "r", encoding="utf-8") as fh:
            d = json.load(fh)
        stored_root = d.get("root", ".")
        m = cls.from_dict(d, root=(path.parent / stored_root))
        m.path = path
        return m
