"""Generator checks: determinism, motion model, class balance, visibility,
and the dataset writer.

The geometry assertions recompute class membership from the template's
analytic shapes, and the occlusion check marches along sensor-to-point
segments testing volume membership directly, so neither shares code with
the generator's own sampling or culling.
"""

import math

import numpy as np
import pytest

from railscan.camera import project_points
from railscan.cloud import cloud_to_bytes, labels_to_bytes, load_cloud, load_labels
from railscan.manifest import DatasetManifest, ScanStatus
from railscan.preprocess import MotionParams, filter_reflections, motion_correct
from railscan.synth import (
    DEFAULT_DENSITIES,
    SynthSceneConfig,
    default_synth_camera,
    scaled_densities,
    synth_dataset,
    synth_scene,
)
from railscan.taxonomy import DEFAULT_CLASSES, UNLABELED_ID
from railscan.transfer import transfer_labels

SMALL_CAMERA = default_synth_camera(640, 480)


def cid(name):
    return DEFAULT_CLASSES.by_name(name).id


@pytest.fixture(scope="module")
def scene42():
    return synth_scene(SynthSceneConfig(seed=42))


# ------------------------------------------------------------ determinism


def test_same_seed_reproduces_every_byte(scene42):
    again = synth_scene(SynthSceneConfig(seed=42))
    assert cloud_to_bytes(scene42.cloud_distorted) == cloud_to_bytes(again.cloud_distorted)
    assert cloud_to_bytes(scene42.cloud_true) == cloud_to_bytes(again.cloud_true)
    assert labels_to_bytes(scene42.labels) == labels_to_bytes(again.labels)
    assert np.array_equal(scene42.label_image.pixels, again.label_image.pixels)


def test_different_seeds_differ(scene42):
    other = synth_scene(SynthSceneConfig(seed=43))
    assert cloud_to_bytes(scene42.cloud_true) != cloud_to_bytes(other.cloud_true)


# ------------------------------------------------------------ motion model


def test_zero_speed_measured_equals_true():
    scene = synth_scene(SynthSceneConfig(seed=7, speed=0.0))
    assert np.array_equal(scene.cloud_distorted.xyz, scene.cloud_true.xyz)


def test_correction_restores_generator_truth():
    cfg = SynthSceneConfig(seed=11, speed=27.78, sweep_duration=0.1, reflection_fraction=0.3)
    scene = synth_scene(cfg)
    fixed = motion_correct(scene.cloud_distorted, MotionParams((1.0, 0.0, 0.0), 27.78))
    assert np.abs(fixed.xyz - scene.cloud_true.xyz).max() < 1e-9


def test_displacement_spans_most_of_the_sweep():
    cfg = SynthSceneConfig(seed=11, speed=27.78, sweep_duration=0.1, reflection_fraction=0.3)
    scene = synth_scene(cfg)
    disp = np.linalg.norm(scene.cloud_distorted.xyz - scene.cloud_true.xyz, axis=1)
    assert disp.max() <= 2.8
    assert disp.max() > 2.5  # reflections sweep the full azimuth circle


def test_t_rel_follows_azimuth(scene42):
    cloud = scene42.cloud_true
    real = ~scene42.reflection_mask
    frac = np.mod(np.arctan2(cloud.xyz[real, 1], cloud.xyz[real, 0]), 2 * math.pi)
    expect = np.minimum(frac / (2 * math.pi) * 0.25, 0.25)
    assert np.allclose(cloud.t_rel[real], expect, atol=1e-12)
    # points arrive in capture order
    assert np.all(np.diff(cloud.t_rel) >= 0)


def test_t_rel_survives_float32_round_trip(scene42):
    as32 = scene42.cloud_true.t_rel.astype(np.float32)
    assert float(as32.max()) < 0.25


# ------------------------------------------------------------ class balance


def test_frequencies_match_configured_densities(scene42):
    labels = scene42.labels.labels
    total_cfg = sum(DEFAULT_DENSITIES.values())
    total_got = int((labels != UNLABELED_ID).sum())
    for name, want in DEFAULT_DENSITIES.items():
        got = int((labels == cid(name)).sum())
        assert got > 0, name
        rel = (got / total_got) / (want / total_cfg)
        assert 0.8 <= rel <= 1.2, f"{name}: frequency off by {rel:.3f}x"


def test_all_nine_classes_present(scene42):
    present = set(np.unique(scene42.labels.labels)) - {UNLABELED_ID}
    assert present == set(range(1, 10))


def test_scaled_densities_round_and_floor_at_one():
    small = scaled_densities(0.0001)
    assert set(small) == set(DEFAULT_DENSITIES)
    assert all(v == 1 for v in small.values())
    half = scaled_densities(0.5)
    assert half["TERRAIN"] == 4500
    with pytest.raises(ValueError, match="positive"):
        scaled_densities(0.0)


# ------------------------------------------------------------ reflections


def test_reflection_filter_retains_about_a_third():
    factor = 10_000 / sum(DEFAULT_DENSITIES.values())
    cfg = SynthSceneConfig(
        seed=3, reflection_fraction=2 / 3, densities=scaled_densities(factor)
    )
    scene = synth_scene(cfg)
    assert scene.cloud_distorted.n_points == pytest.approx(30_000, rel=0.05)
    kept, mask = filter_reflections(scene.cloud_distorted)
    assert np.array_equal(mask, ~scene.reflection_mask)
    assert kept.n_points == pytest.approx(10_000, rel=0.05)


def test_reflections_unlabeled_and_near_sensor():
    cfg = SynthSceneConfig(seed=5, reflection_fraction=0.5, speed=27.78)
    scene = synth_scene(cfg)
    refl = scene.reflection_mask
    assert refl.sum() == pytest.approx((~refl).sum(), abs=1)
    assert (scene.labels.labels[refl] == UNLABELED_ID).all()
    assert (scene.labels.labels[~refl] != UNLABELED_ID).all()
    ranges = np.linalg.norm(scene.cloud_distorted.xyz, axis=1)
    assert ranges[refl].max() < 1.5
    assert ranges[~refl].min() >= 1.5


# ------------------------------------------------------------ geometry truth

BOXES = {
    "PERSON": ((21.6, -13.4, -1.5), (22.4, -12.6, 0.3)),
    "CONSTRUCTION": ((32.0, -16.2, -1.5), (40.0, -15.4, 1.0)),
    "ON_TRACKS": ((47.0, -1.6, -1.5), (47.2, 1.6, 2.3)),
}
POLES = ((24.0, 10.0), (28.0, 8.5))
SIGN_FACES = (25.985, 30.985)


def test_labels_match_template_regions(scene42):
    xyz = scene42.cloud_true.xyz
    labels = scene42.labels.labels
    ground = np.isclose(xyz[:, 2], -1.5)

    for name, band in (("RAIL_TRACK", (0.675, 0.825)), ("TRACKBED", (0.0, 2.2))):
        sel = labels == cid(name)
        assert ground[sel].all()
        assert (xyz[sel, 0] >= 20 - 1e-9).all() and (xyz[sel, 0] <= 46 + 1e-9).all()
        ay = np.abs(xyz[sel, 1])
        assert (ay >= band[0] - 1e-9).all() and (ay <= band[1] + 1e-9).all()

    sel = labels == cid("TERRAIN")
    assert ground[sel].all()
    assert (np.abs(xyz[sel, 1]) >= 2.2 - 1e-9).all()

    for name, (lo, hi) in BOXES.items():
        sel = labels == cid(name)
        p = xyz[sel]
        assert (p >= np.array(lo) - 1e-9).all() and (p <= np.array(hi) + 1e-9).all()

    sel = labels == cid("POLE")
    d = np.min(
        [np.hypot(xyz[sel, 0] - cx, xyz[sel, 1] - cy) for cx, cy in POLES], axis=0
    )
    assert np.allclose(d, 0.06, atol=1e-9)

    sel = labels == cid("SIGN")
    on_face = np.min([np.abs(xyz[sel, 0] - x) for x in SIGN_FACES], axis=0)
    assert np.allclose(on_face, 0.0, atol=1e-9)

    sel = labels == cid("VEGETATION")
    assert (xyz[sel, 0] > 46.0).all()
    assert (xyz[sel, 2] > -1.5).all()


def test_no_kept_point_is_occluded(scene42):
    """March along the sensor-to-point segment and demand it never passes
    through a solid it does not belong to."""
    xyz = scene42.cloud_true.xyz[~scene42.reflection_mask]
    rng = np.random.default_rng(0)
    sample = xyz[rng.choice(len(xyz), 800, replace=False)]
    ts = np.linspace(0.02, 0.98, 500)
    path = sample[:, None, :] * ts[None, :, None]  # (n, steps, 3)

    for lo, hi in BOXES.values():
        margin = 1e-6
        inside = np.all(
            (path > np.array(lo) + margin) & (path < np.array(hi) - margin), axis=2
        )
        own = np.all(
            (sample >= np.array(lo) - 1e-9) & (sample <= np.array(hi) + 1e-9), axis=1
        )
        assert not inside[~own].any()

    for cx, cy in POLES:
        own = np.hypot(sample[:, 0] - cx, sample[:, 1] - cy) < 0.06 + 1e-6
        r = np.hypot(path[:, :, 0] - cx, path[:, :, 1] - cy)
        inside = (r < 0.06 - 1e-6) & (path[:, :, 2] > -1.5) & (path[:, :, 2] < 2.5)
        assert not inside[~own].any()

    # conservative balls inside each bush: any crossing means a cull miss
    for slope in (-0.25, -0.175, -0.10, 0.10, 0.175, 0.25):
        x = {0.10: 49.0, 0.175: 52.5, 0.25: 55.0}[abs(slope)]
        center = np.array([x, slope * x, -0.9])
        own = np.linalg.norm(sample - center, axis=1) < 2.2
        inside = np.linalg.norm(path - center, axis=2) < 0.5
        assert not inside[~own].any()


# ------------------------------------------------------------ label image


def test_label_image_fills_sky_and_background(scene42):
    img = scene42.label_image.pixels
    assert (img[0, :] == cid("SKY")).all()
    assert (img[-1, :] == cid("BACKGROUND")).all()
    assert img.shape == (1536, 2048)


def test_label_image_agrees_with_point_truth(scene42):
    out = transfer_labels(scene42.cloud_true, scene42.label_image, scene42.calibration)
    _, _, valid = project_points(scene42.cloud_true.xyz, scene42.calibration)
    gt = scene42.labels.labels
    acc = (out.labels[valid] == gt[valid]).mean()
    assert valid.all()
    assert acc >= 0.99


# ------------------------------------------------------------ configuration


@pytest.mark.parametrize(
    "kwargs, message",
    [
        ({"extent": 0.0}, "extent"),
        ({"extent": -5.0}, "extent"),
        ({"reflection_fraction": 1.0}, "reflection_fraction"),
        ({"reflection_fraction": -0.1}, "reflection_fraction"),
        ({"sweep_duration": 0.0}, "sweep_duration"),
        ({"sweep_duration": 0.26}, "sweep_duration"),
        ({"speed": 61.0}, "speed"),
        ({"densities": {"SKY": 5}}, "unknown"),
        ({"densities": {"TERRAIN": -1}}, "non-negative"),
        ({"densities": {"TERRAIN": 0}}, "at least one"),
    ],
)
def test_config_rejections(kwargs, message):
    with pytest.raises(ValueError, match=message):
        synth_scene(SynthSceneConfig(**kwargs))


def test_extent_scales_the_template():
    cfg = SynthSceneConfig(
        seed=9, extent=30.0, densities=scaled_densities(0.05), camera=SMALL_CAMERA
    )
    scene = synth_scene(cfg)
    xy = scene.cloud_true.xyz[~scene.reflection_mask][:, :2]
    assert xy[:, 0].max() <= 30.0
    rails = scene.labels.labels[~scene.reflection_mask] == cid("RAIL_TRACK")
    ay = np.abs(xy[rails, 1])
    assert (ay >= 0.675 / 2 - 1e-9).all() and (ay <= 0.825 / 2 + 1e-9).all()


# ------------------------------------------------------------ dataset writer


def small_dataset(tmp_path, **kwargs):
    args = dict(
        cfg=SynthSceneConfig(seed=21, camera=SMALL_CAMERA),
        n_scans=3,
        n_test=1,
        pair_all=True,
        points_scale=0.05,
    )
    args.update(kwargs)
    return synth_dataset(tmp_path, **args)


def test_dataset_files_and_reload(tmp_path):
    manifest = small_dataset(tmp_path, with_predictions=True)
    assert sorted(manifest.scans) == ["s000", "s001", "s002", "t000"]
    loaded = DatasetManifest.load(tmp_path / "manifest.json")
    assert loaded.scan_ids_by_status(ScanStatus.TEST) == ["t000"]
    assert loaded.scan_ids_by_status(ScanStatus.RAW) == ["s000", "s001", "s002"]

    cloud = loaded.load_scan_cloud("s000")
    assert cloud.n_points == loaded.scans["s000"].n_points
    preds = loaded.load_scan_predictions("s000")
    assert preds.n_points == cloud.n_points
    truth = load_cloud(tmp_path / "gt" / "s000.true.bin", scan_id="s000")
    assert truth.n_points == cloud.n_points
    gt = load_labels(tmp_path / "gt" / "s000.labels", expected_n=cloud.n_points)
    assert len(gt.labels) == cloud.n_points

    with pytest.raises(ValueError, match="held-out"):
        loaded.load_scan_labels("t000")
    test_labels = loaded.load_scan_labels("t000", allow_test=True)
    assert len(test_labels.labels) == loaded.scans["t000"].n_points


def test_dataset_is_deterministic(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    small_dataset(a, with_predictions=True)
    small_dataset(b, with_predictions=True)
    assert (a / "manifest.json").read_bytes() == (b / "manifest.json").read_bytes()
    assert (a / "clouds" / "s001.bin").read_bytes() == (b / "clouds" / "s001.bin").read_bytes()
    assert (a / "preds" / "s001.pred").read_bytes() == (b / "preds" / "s001.pred").read_bytes()
    assert (a / "images" / "img000.pgm").read_bytes() == (b / "images" / "img000.pgm").read_bytes()


def test_dataset_pair_all_gives_one_image_per_scan(tmp_path):
    manifest = small_dataset(tmp_path)
    assert len(manifest.images) == len(manifest.scans)
    scans = list(manifest.scans.values())
    images = list(manifest.images.values())
    for scan, image in zip(scans, images):
        assert image.t_image == pytest.approx(scan.t_scan + 0.004)


def test_dataset_slow_image_clock(tmp_path):
    manifest = small_dataset(tmp_path, pair_all=False, n_scans=6, n_test=0)
    # 6 scans at 4 Hz span 1.25 s; a 1.5 Hz camera fits 2-3 frames in that
    assert 2 <= len(manifest.images) <= 3
    times = [e.t_image for e in manifest.images.values()]
    assert times == sorted(times)
    steps = np.diff(times)
    assert np.allclose(steps, 1 / 1.5, atol=1e-9)


def test_dataset_exact_predictions_match_truth(tmp_path):
    manifest = small_dataset(tmp_path, with_predictions=True, prediction_noise=0.0)
    for sid in manifest.scans:
        preds = manifest.load_scan_predictions(sid)
        gt = load_labels(tmp_path / "gt" / f"{sid}.labels", expected_n=preds.n_points)
        labeled = gt.labels != UNLABELED_ID
        assert (preds.argmax_labels()[labeled] == gt.labels[labeled]).all()


def test_dataset_rejects_bad_arguments(tmp_path):
    with pytest.raises(ValueError, match="at least one"):
        small_dataset(tmp_path, n_scans=0)
    with pytest.raises(ValueError, match="prediction_noise"):
        small_dataset(tmp_path, prediction_noise=1.5)
