"""Synthetic trackside scene with exact ground truth.

A fixed template (terrain plane, trackbed strip, two rails, a train front,
a person, a wall, two poles, two signs, six bushes) is point-sampled on
the faces visible from the sensor at the origin, with segment tests
culling anything another object hides. Capture times follow the azimuth
sweep of a rotating scanner, the measured cloud is the true geometry
shifted backward by per-point travel, and the camera label image is
rendered from the same points, so every pipeline stage can be checked
against generator truth.

Template layout (before scaling): sensor at the origin 1.5 m above the
ground plane, track running along +x, all surfaces 20 m or farther out.
Standing objects sit at angles where their occlusion shadows leave the
terrain quickly, keeping per-class point losses small.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np
from scipy import ndimage

from .camera import CameraCalibration, LabelImage, nearest_pixel, project_points, save_label_image
from .cloud import LabelArray, PointCloud, PredictionMatrix, save_cloud, save_labels, save_predictions
from .manifest import DatasetManifest, ImageEntry, ScanEntry, ScanStatus
from .preprocess import MAX_ABS_SPEED
from .taxonomy import DEFAULT_CLASSES, DEFAULT_CLASS_MAP, UNLABELED_ID

GROUND_Z = -1.5
TEMPLATE_EXTENT = 60.0
SWEEP_PERIOD = 0.25

# Largest float32 below 0.25: generated t_rel is clamped here so the value
# survives the float32 file format without touching the open upper bound.
_T_REL_CAP = float(np.nextafter(np.float32(0.25), np.float32(0.0)))

DEFAULT_DENSITIES: Mapping[str, int] = {
    "TERRAIN": 9000,
    "TRACKBED": 4000,
    "RAIL_TRACK": 1200,
    "ON_TRACKS": 1200,
    "PERSON": 500,
    "CONSTRUCTION": 1500,
    "POLE": 400,
    "SIGN": 400,
    "VEGETATION": 2500,
}


def default_synth_camera(width: int = 2048, height: int = 1536) -> CameraCalibration:
    """Forward-looking camera just above and ahead of the scanner."""
    rot = np.array([[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]])
    center = np.array([0.05, 0.0, 0.08])
    return CameraCalibration(
        fx=width * 1000.0 / 2048.0,
        fy=width * 1000.0 / 2048.0,
        cx=width / 2.0,
        cy=height / 2.0,
        rotation=rot,
        translation=-rot @ center,
        width=width,
        height=height,
    )


def scaled_densities(factor: float, base: Optional[Mapping[str, int]] = None) -> Dict[str, int]:
    """Scale per-class point counts, keeping every class represented."""
    if factor <= 0:
        raise ValueError("density scale factor must be positive")
    base = DEFAULT_DENSITIES if base is None else base
    return {k: max(1, int(round(v * factor))) for k, v in base.items()}


@dataclass(frozen=True)
class SynthSceneConfig:
    seed: int = 42
    extent: float = TEMPLATE_EXTENT
    densities: Optional[Mapping[str, int]] = None
    speed: float = 27.78
    reflection_fraction: float = 0.0
    sweep_duration: float = SWEEP_PERIOD
    camera: Optional[CameraCalibration] = None

    def resolved_densities(self) -> Dict[str, int]:
        dens = dict(DEFAULT_DENSITIES if self.densities is None else self.densities)
        known = {c.name for c in DEFAULT_CLASSES if c.is_3d}
        unknown = sorted(set(dens) - known)
        if unknown:
            raise ValueError(f"densities reference unknown classes: {unknown}")
        if any(v < 0 for v in dens.values()):
            raise ValueError("densities must be non-negative")
        if sum(dens.values()) < 1:
            raise ValueError("densities must request at least one point")
        return dens

    def resolved_camera(self) -> CameraCalibration:
        return default_synth_camera() if self.camera is None else self.camera

    def validate(self) -> None:
        if not (self.extent > 0.0) or not math.isfinite(self.extent):
            raise ValueError("extent must be a positive number of meters")
        if not (0.0 <= self.reflection_fraction < 1.0):
            raise ValueError("reflection_fraction must lie in [0, 1)")
        if not (0.0 < self.sweep_duration <= SWEEP_PERIOD):
            raise ValueError(f"sweep_duration must lie in (0, {SWEEP_PERIOD}]")
        if not math.isfinite(self.speed) or abs(self.speed) > MAX_ABS_SPEED:
            raise ValueError(f"|speed| must be <= {MAX_ABS_SPEED}")
        self.resolved_densities()


@dataclass
class SynthScene:
    """One generated sweep plus everything needed to check it."""

    cloud_distorted: PointCloud
    cloud_true: PointCloud
    labels: LabelArray
    label_image: LabelImage
    calibration: CameraCalibration
    reflection_mask: np.ndarray
    config: SynthSceneConfig


# ------------------------------------------------------------- geometry

# Blockers are the solid objects; a sampled point is culled when the open
# segment from the origin to it crosses any blocker it does not belong to.


@dataclass(frozen=True)
class _Box:
    lo: Tuple[float, float, float]
    hi: Tuple[float, float, float]


@dataclass(frozen=True)
class _Cylinder:
    cx: float
    cy: float
    r: float
    z0: float
    z1: float


@dataclass(frozen=True)
class _Ellipsoid:
    center: Tuple[float, float, float]
    radii: Tuple[float, float, float]


@dataclass(frozen=True)
class _Surface:
    class_name: str
    kind: str  # ground | face_x | face_y | cyl | ell
    params: tuple
    area: float
    owner: int  # blocker index, -1 for the ground plane


def _segment_hits_box(p: np.ndarray, box: _Box) -> np.ndarray:
    lo = np.asarray(box.lo)
    hi = np.asarray(box.hi)
    with np.errstate(divide="ignore", invalid="ignore"):
        t0 = lo / p
        t1 = hi / p
    tn = np.minimum(t0, t1)
    tf = np.maximum(t0, t1)
    parallel = p == 0.0
    spans_zero = (lo <= 0.0) & (hi >= 0.0)
    tn = np.where(parallel, np.where(spans_zero, -np.inf, np.inf), tn)
    tf = np.where(parallel, np.where(spans_zero, np.inf, -np.inf), tf)
    enter = tn.max(axis=1)
    leave = tf.min(axis=1)
    eps = 1e-9
    return (enter <= leave) & (leave > eps) & (enter < 1.0 - eps)


def _segment_hits_cylinder(p: np.ndarray, cyl: _Cylinder) -> np.ndarray:
    px, py, pz = p[:, 0], p[:, 1], p[:, 2]
    a = px * px + py * py
    b = -2.0 * (px * cyl.cx + py * cyl.cy)
    c = cyl.cx**2 + cyl.cy**2 - cyl.r**2
    disc = b * b - 4.0 * a * c
    hit = np.zeros(len(p), dtype=bool)
    ok = (disc > 0.0) & (a > 0.0)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    eps = 1e-9
    for sign in (-1.0, 1.0):
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (-b + sign * sq) / (2.0 * a)
        z = t * pz
        hit |= ok & (t > eps) & (t < 1.0 - eps) & (z >= cyl.z0) & (z <= cyl.z1)
    return hit


def _segment_hits_ellipsoid(p: np.ndarray, ell: _Ellipsoid) -> np.ndarray:
    r = np.asarray(ell.radii)
    c = np.asarray(ell.center) / r
    q = p / r
    a = (q * q).sum(axis=1)
    b = -2.0 * (q @ c)
    cc = float(c @ c) - 1.0
    disc = b * b - 4.0 * a * cc
    hit = np.zeros(len(p), dtype=bool)
    ok = (disc > 0.0) & (a > 0.0)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    eps = 1e-9
    for sign in (-1.0, 1.0):
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (-b + sign * sq) / (2.0 * a)
        hit |= ok & (t > eps) & (t < 1.0 - eps)
    return hit


def _segment_hits(p: np.ndarray, blocker) -> np.ndarray:
    if isinstance(blocker, _Box):
        return _segment_hits_box(p, blocker)
    if isinstance(blocker, _Cylinder):
        return _segment_hits_cylinder(p, blocker)
    return _segment_hits_ellipsoid(p, blocker)


def _build_template(s: float, rng: np.random.Generator):
    """Blockers and sampleable surfaces, scaled horizontally by s."""
    g = GROUND_Z
    blockers: List[object] = []
    surfaces: List[_Surface] = []

    def box(lo, hi):
        blockers.append(
            _Box((lo[0] * s, lo[1] * s, lo[2]), (hi[0] * s, hi[1] * s, hi[2]))
        )
        return len(blockers) - 1

    def face_x(cls, owner, x, y0, y1, z0, z1):
        surfaces.append(
            _Surface(cls, "face_x", (x * s, y0 * s, y1 * s, z0, z1),
                     abs(y1 - y0) * s * (z1 - z0), owner)
        )

    def face_y(cls, owner, y, x0, x1, z0, z1):
        surfaces.append(
            _Surface(cls, "face_y", (y * s, x0 * s, x1 * s, z0, z1),
                     abs(x1 - x0) * s * (z1 - z0), owner)
        )

    def ground(cls, x0, x1, y0, y1):
        surfaces.append(
            _Surface(cls, "ground", (x0 * s, x1 * s, y0 * s, y1 * s, g),
                     abs(x1 - x0) * abs(y1 - y0) * s * s, -1)
        )

    # ground cover: terrain both sides, trackbed between, rails as flush
    # painted strips inside the trackbed
    ground("TERRAIN", 20, 46, 2.2, 18)
    ground("TERRAIN", 20, 46, -18, -2.2)
    ground("TRACKBED", 20, 46, -0.675, 0.675)
    ground("TRACKBED", 20, 46, 0.825, 2.2)
    ground("TRACKBED", 20, 46, -2.2, -0.825)
    ground("RAIL_TRACK", 20, 46, 0.675, 0.825)
    ground("RAIL_TRACK", 20, 46, -0.825, -0.675)

    # train front just past the sampled track
    train = box((47.0, -1.6, g), (47.2, 1.6, 2.3))
    face_x("ON_TRACKS", train, 47.0, -1.6, 1.6, g, 2.3)

    # person on the left, off the track
    person = box((21.6, -13.4, g), (22.4, -12.6, 0.3))
    face_x("PERSON", person, 21.6, -13.4, -12.6, g, 0.3)
    face_y("PERSON", person, -12.6, 21.6, 22.4, g, 0.3)

    # wall near the left terrain edge, long side almost radial
    wall = box((32.0, -16.2, g), (40.0, -15.4, 1.0))
    face_x("CONSTRUCTION", wall, 32.0, -16.2, -15.4, g, 1.0)
    face_y("CONSTRUCTION", wall, -15.4, 32.0, 40.0, g, 1.0)

    for cx, cy in ((24.0, 10.0), (28.0, 8.5)):
        idx = len(blockers)
        blockers.append(_Cylinder(cx * s, cy * s, 0.06 * s, g, 2.5))
        surfaces.append(
            _Surface("POLE", "cyl", (cx * s, cy * s, 0.06 * s, g, 2.5),
                     math.pi * 0.06 * s * (2.5 - g), idx)
        )

    for cx, cy in ((26.0, 14.0), (31.0, 15.0)):
        idx = box((cx - 0.015, cy - 0.45, 0.2), (cx + 0.015, cy + 0.45, 0.9))
        face_x("SIGN", idx, cx - 0.015, cy - 0.45, cy + 0.45, 0.2, 0.9)

    # bushes past the train, one per angular slot so they never shadow
    # each other
    for slope in (-0.25, -0.175, -0.10, 0.10, 0.175, 0.25):
        x = {0.10: 49.0, 0.175: 52.5, 0.25: 55.0}[abs(slope)]
        rh = float(rng.uniform(1.0, 1.6)) * s
        rz = float(rng.uniform(0.8, 1.2))
        center = (x * s, slope * x * s, g + 0.6 * rz)
        idx = len(blockers)
        blockers.append(_Ellipsoid(center, (rh, rh, rz)))
        surfaces.append(
            _Surface("VEGETATION", "ell", (center, (rh, rh, rz)),
                     2.0 * math.pi * (rh * rh + 2.0 * rh * rz) / 3.0, idx)
        )

    return blockers, surfaces


def _split_counts(total: int, weights: List[float]) -> List[int]:
    """Deterministic largest-remainder split of total over weights."""
    w = np.asarray(weights, dtype=np.float64)
    exact = total * w / w.sum()
    counts = np.floor(exact).astype(int)
    short = total - int(counts.sum())
    if short > 0:
        order = np.argsort(-(exact - counts), kind="stable")
        counts[order[:short]] += 1
    return counts.tolist()


def _sample_surface(rng: np.random.Generator, surf: _Surface, n: int) -> np.ndarray:
    if n == 0:
        return np.zeros((0, 3))
    if surf.kind == "ground":
        x0, x1, y0, y1, z = surf.params
        return np.column_stack(
            [rng.uniform(x0, x1, n), rng.uniform(y0, y1, n), np.full(n, z)]
        )
    if surf.kind == "face_x":
        x, y0, y1, z0, z1 = surf.params
        return np.column_stack(
            [np.full(n, x), rng.uniform(y0, y1, n), rng.uniform(z0, z1, n)]
        )
    if surf.kind == "face_y":
        y, x0, x1, z0, z1 = surf.params
        return np.column_stack(
            [rng.uniform(x0, x1, n), np.full(n, y), rng.uniform(z0, z1, n)]
        )
    if surf.kind == "cyl":
        cx, cy, r, z0, z1 = surf.params
        # half facing the sensor; the margin keeps normals off the silhouette
        theta = math.atan2(-cy, -cx)
        phi = rng.uniform(theta - math.pi / 2 + 0.02, theta + math.pi / 2 - 0.02, n)
        return np.column_stack(
            [cx + r * np.cos(phi), cy + r * np.sin(phi), rng.uniform(z0, z1, n)]
        )
    # ellipsoid: rejection-sample directions whose outward normal faces the
    # sensor and whose point clears the ground
    center, radii = surf.params
    center = np.asarray(center)
    radii = np.asarray(radii)
    out = np.zeros((0, 3))
    while len(out) < n:
        d = rng.normal(size=(max(64, 2 * n), 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        pts = center + d * radii
        normals = d / radii
        facing = np.einsum("ij,ij->i", normals, -pts) > 0.0
        ok = facing & (pts[:, 2] > GROUND_Z + 0.02)
        out = np.concatenate([out, pts[ok]])
    return out[:n]


def _azimuth_t_rel(xyz: np.ndarray, sweep_duration: float) -> np.ndarray:
    frac = np.mod(np.arctan2(xyz[:, 1], xyz[:, 0]), 2.0 * math.pi) / (2.0 * math.pi)
    return np.minimum(frac * sweep_duration, _T_REL_CAP)


def _render_label_image(
    xyz: np.ndarray,
    class_ids: np.ndarray,
    calib: CameraCalibration,
    image_id: str,
    fill_radius: float = 6.0,
) -> LabelImage:
    """Z-buffer splat of the labeled points, gaps within fill_radius filled
    from the nearest splat, the rest split into sky above the principal row
    and background below it."""
    sky = DEFAULT_CLASSES.by_name("SKY").id
    background = DEFAULT_CLASSES.by_name("BACKGROUND").id
    empty = 255

    u, v, valid = project_points(xyz, calib)
    depth = (xyz @ calib.R.T + calib.t)[:, 2]
    px = nearest_pixel(u[valid], calib.width)
    py = nearest_pixel(v[valid], calib.height)
    cls = class_ids[valid].astype(np.uint8)

    grid = np.full((calib.height, calib.width), empty, dtype=np.uint8)
    order = np.argsort(-depth[valid], kind="stable")  # nearest written last
    grid[py[order], px[order]] = cls[order]

    holes = grid == empty
    dist, (iy, ix) = ndimage.distance_transform_edt(holes, return_indices=True)
    near = holes & (dist <= fill_radius)
    grid[near] = grid[iy[near], ix[near]]

    rest = grid == empty
    above = np.arange(calib.height)[:, None] < calib.cy
    grid[rest & above] = sky
    grid[rest & ~above] = background
    return LabelImage(image_id=image_id, pixels=grid, classes=DEFAULT_CLASSES)


def synth_scene(
    cfg: Optional[SynthSceneConfig] = None,
    scan_id: str = "synth000",
    t_scan: float = 0.0,
    image_id: Optional[str] = None,
) -> SynthScene:
    """Generate one sweep. The seed fully determines every output byte."""
    cfg = SynthSceneConfig() if cfg is None else cfg
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    calib = cfg.resolved_camera()
    scale = cfg.extent / TEMPLATE_EXTENT
    blockers, surfaces = _build_template(scale, rng)
    densities = cfg.resolved_densities()

    points, owners, ids = [], [], []
    for name, total in densities.items():
        surfs = [f for f in surfaces if f.class_name == name]
        class_id = DEFAULT_CLASSES.by_name(name).id
        for surf, n in zip(surfs, _split_counts(total, [f.area for f in surfs])):
            pts = _sample_surface(rng, surf, n)
            points.append(pts)
            owners.append(np.full(len(pts), surf.owner))
            ids.append(np.full(len(pts), class_id, dtype=np.uint16))
    xyz = np.concatenate(points)
    owner = np.concatenate(owners)
    class_ids = np.concatenate(ids)

    blocked = np.zeros(len(xyz), dtype=bool)
    for idx, blocker in enumerate(blockers):
        blocked |= _segment_hits(xyz, blocker) & (owner != idx)
    xyz = xyz[~blocked]
    class_ids = class_ids[~blocked]

    travel = np.array([1.0, 0.0, 0.0])
    t_rel = _azimuth_t_rel(xyz, cfg.sweep_duration)
    true_xyz = xyz
    dist_xyz = true_xyz - np.outer(t_rel * cfg.speed, travel)

    n_real = len(true_xyz)
    f = cfg.reflection_fraction
    n_refl = int(round(n_real * f / (1.0 - f))) if f > 0.0 else 0
    if n_refl:
        # spurious near-sensor returns live in the measured frame; their
        # "true" position is wherever de-distortion will push them
        d = rng.normal(size=(n_refl, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        refl_dist = d * rng.uniform(0.05, 1.4, n_refl)[:, None]
        refl_t = _azimuth_t_rel(refl_dist, cfg.sweep_duration)
        refl_true = refl_dist + np.outer(refl_t * cfg.speed, travel)
        true_xyz = np.concatenate([true_xyz, refl_true])
        dist_xyz = np.concatenate([dist_xyz, refl_dist])
        t_rel = np.concatenate([t_rel, refl_t])
        class_ids = np.concatenate(
            [class_ids, np.full(n_refl, UNLABELED_ID, dtype=np.uint16)]
        )
    if n_real and np.sqrt((dist_xyz[:n_real] ** 2).sum(axis=1)).min() <= 1.45:
        raise ValueError(
            "degenerate config: surface points land in the near-sensor band "
            "reserved for reflections"
        )
    reflections = np.zeros(len(true_xyz), dtype=bool)
    reflections[n_real:] = True

    order = np.argsort(t_rel, kind="stable")  # capture order, like a scanner
    true_xyz, dist_xyz = true_xyz[order], dist_xyz[order]
    t_rel, class_ids = t_rel[order], class_ids[order]
    reflections = reflections[order]
    intensity = rng.uniform(0.0, 1.0, len(true_xyz))

    image_id = image_id if image_id is not None else f"img_{scan_id}"
    label_image = _render_label_image(
        true_xyz[~reflections], class_ids[~reflections], calib, image_id
    )
    return SynthScene(
        cloud_distorted=PointCloud(scan_id, t_scan, dist_xyz, intensity, t_rel),
        cloud_true=PointCloud(scan_id, t_scan, true_xyz.copy(), intensity.copy(), t_rel.copy()),
        labels=LabelArray(
            scan_id, class_ids, np.zeros(len(class_ids), dtype=np.uint8)
        ),
        label_image=label_image,
        calibration=calib,
        reflection_mask=reflections,
        config=cfg,
    )


# -------------------------------------------------------------- dataset


def _noisy_predictions(
    rng: np.random.Generator, labels: LabelArray, difficulty: float
) -> PredictionMatrix:
    """Rows = (1 - d) * one-hot(truth) + d * Dirichlet noise; unlabeled
    points get pure noise."""
    n = len(labels)
    noise = rng.dirichlet(np.full(9, 0.8), size=n)
    rows = difficulty * noise
    labeled = labels.labels > 0
    rows[labeled, labels.labels[labeled] - 1] += 1.0 - difficulty
    rows[~labeled] = noise[~labeled]
    return PredictionMatrix(labels.scan_id, rows)


def synth_dataset(
    out_dir,
    cfg: Optional[SynthSceneConfig] = None,
    n_scans: int = 6,
    n_test: int = 2,
    pair_all: bool = False,
    with_predictions: bool = False,
    prediction_noise: float = 0.25,
    points_scale: float = 1.0,
    image_rate: float = 1.5,
    t0: float = 100.0,
    store_truth: bool = True,
) -> DatasetManifest:
    """Write a manifest-rooted dataset of generated sweeps.

    Training scans arrive RAW (measured clouds only); test scans arrive
    with their ground-truth labels attached. Generator truth for every
    scan lands under gt/ so tests can compare any stage against it.
    Camera images come in either paired with every scan (pair_all) or on
    their own slower clock, leaving pairing to the sync stage.
    """
    if n_scans < 1 or n_test < 0:
        raise ValueError("need at least one training scan and n_test >= 0")
    if not (0.0 <= prediction_noise <= 1.0):
        raise ValueError("prediction_noise must lie in [0, 1]")
    cfg = SynthSceneConfig() if cfg is None else cfg
    if points_scale != 1.0:
        cfg = replace(cfg, densities=scaled_densities(points_scale, cfg.resolved_densities()))
    cfg.validate()

    out = Path(out_dir)
    for sub in ("clouds", "images", "gt", "labels", "preds"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    manifest = DatasetManifest(
        root=out, calibration=cfg.resolved_camera(), class_map=dict(DEFAULT_CLASS_MAP)
    )
    pred_rng = np.random.default_rng(cfg.seed + 777)

    scenes: Dict[str, SynthScene] = {}
    total = n_scans + n_test
    for i in range(total):
        is_test = i >= n_scans
        sid = f"t{i - n_scans:03d}" if is_test else f"s{i:03d}"
        t_scan = t0 + i * SWEEP_PERIOD
        scene = synth_scene(replace(cfg, seed=cfg.seed + i), scan_id=sid, t_scan=t_scan)
        scenes[sid] = scene

        save_cloud(scene.cloud_distorted, out / "clouds" / f"{sid}.bin")
        save_labels(scene.labels, out / "gt" / f"{sid}.labels")
        if store_truth:
            save_cloud(scene.cloud_true, out / "gt" / f"{sid}.true.bin")
        manifest.add_scan(
            ScanEntry(
                scan_id=sid,
                cloud=f"clouds/{sid}.bin",
                t_scan=t_scan,
                v_current=cfg.speed,
                n_points=scene.cloud_distorted.n_points,
                status=ScanStatus.TEST if is_test else ScanStatus.RAW,
                labels=f"gt/{sid}.labels" if is_test else None,
            ),
            at=t_scan,
        )
        if with_predictions:
            difficulty = prediction_noise * float(pred_rng.uniform(0.3, 1.0))
            pred = _noisy_predictions(pred_rng, scene.labels, difficulty)
            save_predictions(pred, out / "preds" / f"{sid}.pred")
            manifest.set_prediction(sid, f"preds/{sid}.pred")

    scan_ids = list(manifest.scans)
    if pair_all:
        image_times = [
            (f"img{i:03d}", manifest.scans[sid].t_scan + 0.004, scenes[sid])
            for i, sid in enumerate(scan_ids)
        ]
    else:
        t_last = t0 + (total - 1) * SWEEP_PERIOD
        image_times = []
        j = 0
        while t0 + j / image_rate <= t_last + 0.1:
            img_scene = synth_scene(
                replace(cfg, seed=cfg.seed + 50_000 + j), scan_id=f"cam{j:03d}"
            )
            image_times.append((f"img{j:03d}", t0 + j / image_rate + 0.004, img_scene))
            j += 1
    for img_id, t_image, scene in image_times:
        img = LabelImage(
            image_id=img_id,
            pixels=scene.label_image.pixels,
            classes=DEFAULT_CLASSES,
        )
        save_label_image(img, out / "images" / f"{img_id}.pgm")
        manifest.add_image(
            ImageEntry(image_id=img_id, t_image=t_image, label_image=f"images/{img_id}.pgm")
        )

    manifest.save(out / "manifest.json")
    return manifest
