"""Pinhole camera model, point projection, and 8-bit label images.

The camera is described by a rigid transform from the sensor frame into the
camera frame (P_cam = R @ P + t) plus pinhole intrinsics. No lens distortion
model: the segmentation source imagery is already rectified.

Label images store one class id per pixel and are written as binary PGM
(P5, maxval 255), which any image viewer can open for a quick look.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from .taxonomy import ClassSet, DEFAULT_CLASSES

MIN_CAMERA_DEPTH = 0.1  # metres; points closer than this are never projected

PathLike = Union[str, Path]


@dataclass(frozen=True)
class CameraCalibration:
    """Extrinsics (sensor -> camera) and pinhole intrinsics.

    R is row-major 3x3 and must be a proper rotation; t is metres. fx, fy, cx,
    cy are pixels; width/height default to the 2048x1536 annotation camera.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    rotation: Tuple[Tuple[float, float, float], ...]
    translation: Tuple[float, float, float]
    width: int = 2048
    height: int = 1536

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64)
        if R.shape != (3, 3) or not np.isfinite(R).all():
            raise ValueError("rotation must be a finite 3x3 matrix")
        if t.shape != (3,) or not np.isfinite(t).all():
            raise ValueError("translation must be a finite 3-vector")
        if np.abs(R @ R.T - np.eye(3)).max() > 1e-9:
            raise ValueError("rotation is not orthonormal (tolerance 1e-9)")
        if abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise ValueError("rotation must have determinant +1")
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    @property
    def R(self) -> np.ndarray:
        return np.asarray(self.rotation, dtype=np.float64)

    @property
    def t(self) -> np.ndarray:
        return np.asarray(self.translation, dtype=np.float64)

    def with_translation_offset(self, delta) -> "CameraCalibration":
        """Same camera with the extrinsic translation shifted by delta
        (camera-frame metres). Used for perturbation studies."""
        t = self.t + np.asarray(delta, dtype=np.float64)
        return CameraCalibration(
            self.fx, self.fy, self.cx, self.cy, self.rotation,
            tuple(float(v) for v in t), self.width, self.height,
        )

    def to_dict(self) -> dict:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "rotation": [list(row) for row in self.R],
            "translation": list(self.t),
            "width": self.width,
            "height": self.height,
        }

    @staticmethod
    def from_dict(d: dict) -> "CameraCalibration":
        return CameraCalibration(
            fx=float(d["fx"]),
            fy=float(d["fy"]),
            cx=float(d["cx"]),
            cy=float(d["cy"]),
            rotation=tuple(tuple(float(v) for v in row) for row in d["rotation"]),
            translation=tuple(float(v) for v in d["translation"]),
            width=int(d.get("width", 2048)),
            height=int(d.get("height", 1536)),
        )


def project_points(
    xyz: np.ndarray, calib: CameraCalibration
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Project sensor-frame points through the camera.

    Returns (u, v, valid). A projection is valid iff the camera-frame depth
    exceeds MIN_CAMERA_DEPTH and the continuous pixel coordinates satisfy
    0 <= u < width and 0 <= v < height. u, v for invalid points are whatever
    the arithmetic produced and must not be consumed.
    """
    xyz = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
    cam = xyz @ calib.R.T + calib.t
    z = cam[:, 2]
    in_front = z > MIN_CAMERA_DEPTH
    with np.errstate(divide="ignore", invalid="ignore"):
        u = calib.fx * cam[:, 0] / z + calib.cx
        v = calib.fy * cam[:, 1] / z + calib.cy
    valid = (
        in_front
        & (u >= 0.0)
        & (u < calib.width)
        & (v >= 0.0)
        & (v < calib.height)
    )
    return u, v, valid


def nearest_pixel(coords: np.ndarray, size: int) -> np.ndarray:
    """Round continuous pixel coordinates to the nearest pixel index, halves
    rounding down; the end-of-axis half-open sliver clamps to the last pixel
    (which is the nearest one that exists)."""
    idx = np.ceil(np.asarray(coords, dtype=np.float64) - 0.5).astype(np.int64)
    return np.clip(idx, 0, size - 1)


@dataclass
class LabelImage:
    """Per-pixel class ids for one camera frame."""

    image_id: str
    pixels: np.ndarray
    classes: ClassSet = field(default=DEFAULT_CLASSES, repr=False)

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.uint8)
        if self.pixels.ndim != 2:
            raise ValueError(f"image {self.image_id}: pixels must be 2D")
        self.validate()

    def validate(self):
        present = np.unique(self.pixels)
        declared = np.array([c.id for c in self.classes], dtype=np.uint8)
        unknown = np.setdiff1d(present, declared)
        if unknown.size:
            raise ValueError(
                f"image {self.image_id}: pixel value {int(unknown[0])} is not a "
                f"declared class id"
            )

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def matches(self, calib: CameraCalibration) -> bool:
        return self.width == calib.width and self.height == calib.height


def save_label_image(img: LabelImage, path: PathLike) -> None:
    img.validate()
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + img.pixels.tobytes())


def load_label_image(
    path: PathLike, classes: ClassSet = DEFAULT_CLASSES, image_id: str | None = None
) -> LabelImage:
    path = Path(path)
    data = path.read_bytes()
    m = re.match(rb"P5\s+(?:#[^\n]*\n\s*)*(\d+)\s+(\d+)\s+(\d+)\s", data)
    if not m:
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    width, height, maxval = (int(m.group(i)) for i in (1, 2, 3))
    if maxval != 255:
        raise ValueError(f"{path}: maxval {maxval}, expected 255")
    pixels = np.frombuffer(data, dtype=np.uint8, offset=m.end())
    if pixels.size != width * height:
        raise ValueError(
            f"{path}: payload holds {pixels.size} pixels, header says "
            f"{width * height}"
        )
    return LabelImage(
        image_id=image_id if image_id is not None else path.stem,
        pixels=pixels.reshape(height, width),
        classes=classes,
    )
