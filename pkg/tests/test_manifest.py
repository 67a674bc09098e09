import json

import numpy as np
import pytest

from railscan import (
    DatasetManifest,
    ImageEntry,
    LabelArray,
    PointCloud,
    ScanEntry,
    ScanStatus,
    save_cloud,
    save_labels,
)
from railscan.camera import CameraCalibration


def small_calib():
    return CameraCalibration(
        fx=500.0,
        fy=500.0,
        cx=320.0,
        cy=240.0,
        rotation=np.eye(3),
        translation=np.zeros(3),
        width=640,
        height=480,
    )


def write_cloud(root, name, n=4, seed=0):
    rng = np.random.default_rng(seed)
    cloud = PointCloud(
        scan_id=name,
        t_scan=0.0,
        xyz=rng.uniform(-5, 5, (n, 3)),
        intensity=rng.uniform(0, 1, n),
        t_rel=rng.uniform(0, 0.2, n),
    )
    save_cloud(cloud, root / f"{name}.bin")
    return cloud


def make_manifest(tmp_path, statuses=(ScanStatus.RAW, ScanStatus.COARSE)):
    m = DatasetManifest(root=tmp_path, calibration=small_calib())
    m.add_image(ImageEntry(image_id="img0", t_image=10.0, label_image="img0.pgm"))
    for i, status in enumerate(statuses):
        sid = f"s{i}"
        write_cloud(tmp_path, sid, n=4, seed=i)
        m.add_scan(
            ScanEntry(
                scan_id=sid,
                cloud=f"{sid}.bin",
                t_scan=10.0 + i,
                v_current=12.5,
                n_points=4,
                status=status,
            ),
            at=float(i),
        )
    return m


def test_save_load_round_trip(tmp_path):
    m = make_manifest(tmp_path)
    m.set_sync("s0", "img0", dt=0.004)
    m.set_labels("s1", "labels/s1.labels")
    m.set_prediction("s1", "preds/s1.pred")
    m.set_status("s0", ScanStatus.COARSE, at=2.0)
    m.al_iterations.append({"iteration": 1, "ranked": [], "selected": []})
    path = m.save(tmp_path / "manifest.json")

    loaded = DatasetManifest.load(path)
    assert loaded.to_dict() == m.to_dict()
    assert loaded.path == path
    assert loaded.root == tmp_path
    assert loaded.scans["s0"].status is ScanStatus.COARSE
    assert loaded.scans["s0"].sync_dt == pytest.approx(0.004)
    assert loaded.calibration.fx == 500.0


def test_save_without_path_fails(tmp_path):
    m = make_manifest(tmp_path)
    with pytest.raises(ValueError, match="no bound path"):
        m.save()


def test_failed_save_leaves_previous_file_intact(tmp_path):
    m = make_manifest(tmp_path)
    path = m.save(tmp_path / "manifest.json")
    before = path.read_bytes()

    m.al_iterations.append({"iteration": object()})  # not JSON-serializable
    with pytest.raises(TypeError):
        m.save()

    assert path.read_bytes() == before
    assert list(tmp_path.glob("*.tmp")) == []


def test_duplicate_ids_rejected(tmp_path):
    m = make_manifest(tmp_path)
    with pytest.raises(ValueError, match="duplicate scan_id"):
        m.add_scan(
            ScanEntry(
                scan_id="s0",
                cloud="s0.bin",
                t_scan=0.0,
                v_current=0.0,
                n_points=4,
                status=ScanStatus.RAW,
            )
        )
    with pytest.raises(ValueError, match="duplicate image_id"):
        m.add_image(ImageEntry(image_id="img0", t_image=0.0, label_image="x.pgm"))


def test_unknown_image_reference_rejected(tmp_path):
    m = make_manifest(tmp_path)
    with pytest.raises(ValueError, match="unknown image"):
        m.add_scan(
            ScanEntry(
                scan_id="s9",
                cloud="s9.bin",
                t_scan=0.0,
                v_current=0.0,
                n_points=4,
                status=ScanStatus.RAW,
                image_id="nope",
                sync_dt=0.001,
            )
        )
    with pytest.raises(KeyError, match="unknown image"):
        m.set_sync("s0", "nope", dt=0.001)


def test_paths_must_stay_inside_root(tmp_path):
    m = make_manifest(tmp_path)
    with pytest.raises(ValueError, match="relative"):
        m.set_labels("s0", "/etc/passwd")
    with pytest.raises(ValueError, match="relative"):
        m.set_prediction("s0", "../outside.bin")
    assert m.resolve("sub/file.bin") == tmp_path / "sub" / "file.bin"


def test_scan_entry_field_validation(tmp_path):
    with pytest.raises(ValueError, match="set together"):
        ScanEntry(
            scan_id="a",
            cloud="a.bin",
            t_scan=0.0,
            v_current=0.0,
            n_points=1,
            status=ScanStatus.RAW,
            image_id="img0",
        ).validate()
    with pytest.raises(ValueError, match="v_current"):
        ScanEntry(
            scan_id="a",
            cloud="a.bin",
            t_scan=0.0,
            v_current=80.0,
            n_points=1,
            status=ScanStatus.RAW,
        ).validate()


def test_status_moves_forward_only(tmp_path):
    m = make_manifest(tmp_path)
    m.set_status("s0", ScanStatus.COARSE)
    with pytest.raises(ValueError, match="only move forward"):
        m.set_status("s0", ScanStatus.COARSE)
    with pytest.raises(ValueError, match="only move forward"):
        m.set_status("s0", ScanStatus.RAW)
    # skipping intermediate stages is allowed
    m.set_status("s0", ScanStatus.CORRECTED)
    assert m.scans["s0"].status is ScanStatus.CORRECTED


def test_test_split_is_an_island(tmp_path):
    m = make_manifest(tmp_path)
    write_cloud(tmp_path, "t0", n=4, seed=7)
    m.add_scan(
        ScanEntry(
            scan_id="t0",
            cloud="t0.bin",
            t_scan=99.0,
            v_current=0.0,
            n_points=4,
            status=ScanStatus.TEST,
        )
    )
    with pytest.raises(ValueError, match="registration only"):
        m.set_status("t0", ScanStatus.COARSE)
    with pytest.raises(ValueError, match="registration only"):
        m.set_status("s0", ScanStatus.TEST)


def test_transition_log_replays_to_current_state(tmp_path):
    m = make_manifest(tmp_path)
    m.set_status("s0", ScanStatus.COARSE, at=10.0)
    m.set_status("s0", ScanStatus.PENDING_ANNOTATION, at=11.0)
    m.set_status("s1", ScanStatus.CORRECTED, at=12.0)
    m.check_transitions()

    # every change is in the log with its timestamp
    moves = [t for t in m.transitions if t["scan_id"] == "s0"]
    assert [(t["from"], t["to"]) for t in moves] == [
        (None, "RAW"),
        ("RAW", "COARSE"),
        ("COARSE", "PENDING_ANNOTATION"),
    ]
    assert moves[2]["at"] == 11.0

    # a status edit the log does not explain is detected
    m.scans["s1"].status = ScanStatus.COARSE
    with pytest.raises(ValueError, match="log replays to"):
        m.check_transitions()


def test_load_rejects_tampered_status(tmp_path):
    m = make_manifest(tmp_path)
    m.set_status("s0", ScanStatus.COARSE)
    path = m.save(tmp_path / "manifest.json")
    d = json.loads(path.read_text())
    next(s for s in d["scans"] if s["scan_id"] == "s0")["status"] = "CORRECTED"
    path.write_text(json.dumps(d))
    with pytest.raises(ValueError, match="log replays to"):
        DatasetManifest.load(path)


def test_load_rejects_wrong_version(tmp_path):
    m = make_manifest(tmp_path)
    path = m.save(tmp_path / "manifest.json")
    d = json.loads(path.read_text())
    d["version"] = 99
    path.write_text(json.dumps(d))
    with pytest.raises(ValueError, match="version"):
        DatasetManifest.load(path)


def test_load_scan_cloud_checks_point_count(tmp_path):
    m = make_manifest(tmp_path)
    cloud = m.load_scan_cloud("s0")
    assert cloud.n_points == 4
    assert cloud.scan_id == "s0"
    assert cloud.t_scan == 10.0

    m.scans["s0"].n_points = 7
    with pytest.raises(ValueError, match="manifest says 7"):
        m.load_scan_cloud("s0")


def test_test_labels_need_explicit_permission(tmp_path):
    m = DatasetManifest(root=tmp_path)
    cloud = write_cloud(tmp_path, "t0", n=3, seed=1)
    labels = LabelArray(
        scan_id="t0",
        labels=np.array([1, 2, 3], dtype=np.uint16),
        provenance=np.zeros(3, dtype=np.uint8),
    )
    save_labels(labels, tmp_path / "t0.labels")
    m.add_scan(
        ScanEntry(
            scan_id="t0",
            cloud="t0.bin",
            t_scan=0.0,
            v_current=0.0,
            n_points=cloud.n_points,
            status=ScanStatus.TEST,
            labels="t0.labels",
        )
    )
    with pytest.raises(ValueError, match="test split"):
        m.load_scan_labels("t0")
    got = m.load_scan_labels("t0", allow_test=True)
    assert got.labels.tolist() == [1, 2, 3]


def test_missing_artifacts_reported(tmp_path):
    m = make_manifest(tmp_path)
    with pytest.raises(ValueError, match="no label file"):
        m.load_scan_labels("s0")
    with pytest.raises(ValueError, match="no prediction file"):
        m.load_scan_predictions("s0")
    with pytest.raises(KeyError, match="unknown scan"):
        m.scan("ghost")


def test_next_iteration_counts_from_log(tmp_path):
    m = make_manifest(tmp_path)
    assert m.next_iteration() == 1
    m.al_iterations.append({"iteration": 3, "ranked": [], "selected": []})
    assert m.next_iteration() == 4
