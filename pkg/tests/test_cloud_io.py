"""Binary format round trips and validation errors.

The independent oracle here is single-record arithmetic with the struct
module; bulk round trips are checked at byte level.
"""

import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from railscan.cloud import (
    LabelArray,
    PointCloud,
    PredictionMatrix,
    cloud_to_bytes,
    labels_from_bytes,
    labels_to_bytes,
    load_cloud,
    load_labels,
    load_predictions,
    predictions_from_bytes,
    predictions_to_bytes,
    save_cloud,
    save_labels,
    save_predictions,
)
from railscan.taxonomy import N_CLASSES_3D


def _cloud(xyz, intensity, t_rel, scan_id="s0", t_scan=123.0):
    return PointCloud(scan_id, t_scan, np.asarray(xyz), intensity, t_rel)


def test_single_record_against_struct_oracle(tmp_path):
    # one point (1, 2, 3) with intensity 0.5 at t_rel 0.01 -> exactly 20 bytes
    c = _cloud([[1.0, 2.0, 3.0]], [0.5], [0.01])
    blob = cloud_to_bytes(c)
    assert len(blob) == 20
    assert blob == struct.pack("<5f", 1.0, 2.0, 3.0, 0.5, 0.01)
    p = tmp_path / "one.bin"
    p.write_bytes(blob)
    back = load_cloud(p, scan_id="s0", t_scan=123.0)
    assert back.xyz.tolist() == [[1.0, 2.0, 3.0]]
    assert back.intensity[0] == np.float32(0.5)
    assert back.t_rel[0] == np.float32(0.01)


def test_empty_cloud_file(tmp_path):
    p = tmp_path / "empty.bin"
    p.write_bytes(b"")
    c = load_cloud(p)
    assert len(c) == 0 and c.xyz.shape == (0, 3)
    assert cloud_to_bytes(c) == b""


def test_truncated_cloud_rejected(tmp_path):
    p = tmp_path / "bad.bin"
    p.write_bytes(b"\x00" * 21)
    with pytest.raises(ValueError, match="20-byte"):
        load_cloud(p)


def test_nonfinite_coordinate_reports_index():
    xyz = np.zeros((5, 3))
    xyz[3, 1] = np.nan
    with pytest.raises(ValueError, match="index 3"):
        _cloud(xyz, np.zeros(5), np.zeros(5))


def test_intensity_and_t_rel_bounds():
    with pytest.raises(ValueError, match="intensity"):
        _cloud([[0, 0, 0]], [1.5], [0.0])
    with pytest.raises(ValueError, match="t_rel"):
        _cloud([[0, 0, 0]], [0.5], [0.25])
    with pytest.raises(ValueError, match="t_rel"):
        _cloud([[0, 0, 0]], [0.5], [-0.01])


def test_float32_overflow_rejected():
    c = _cloud([[1.0, 2.0, 3.0]], [0.5], [0.01])
    c.xyz[0, 0] = 1e300  # valid float64, not representable as float32
    with pytest.raises(ValueError, match="float32"):
        cloud_to_bytes(c)


def test_label_bit_layout(tmp_path):
    arr = LabelArray("s0", [0, 3, 9], [0, 1, 0])
    blob = labels_to_bytes(arr)
    assert blob == struct.pack("<3I", 0, 3 | (1 << 16), 9)
    p = tmp_path / "s0.labels"
    p.write_bytes(blob)
    back = load_labels(p)
    assert back.labels.tolist() == [0, 3, 9]
    assert back.provenance.tolist() == [0, 1, 0]


def test_label_unknown_class_rejected():
    with pytest.raises(ValueError, match="label id 12"):
        LabelArray("s0", [12], [0])
    # image-only ids are not point labels
    with pytest.raises(ValueError, match="label id 10"):
        LabelArray("s0", [10], [0])


def test_label_reserved_bits_rejected():
    blob = struct.pack("<2I", 3, 3 | (1 << 18))
    with pytest.raises(ValueError, match="reserved.*index 1"):
        labels_from_bytes(blob, scan_id="s0")


def test_label_length_mismatch(tmp_path):
    p = tmp_path / "s0.labels"
    save_labels(LabelArray("s0", [1, 2], [0, 0]), p)
    with pytest.raises(ValueError, match="referenced cloud"):
        load_labels(p, expected_n=3)


def test_prediction_header_and_rows(tmp_path):
    probs = np.full((4, 9), 1.0 / 9.0, dtype=np.float32)
    pred = PredictionMatrix("s0", probs)
    blob = predictions_to_bytes(pred)
    n, k = struct.unpack("<2I", blob[:8])
    assert (n, k) == (4, 9)
    assert len(blob) == 8 + 4 * 9 * 4
    p = tmp_path / "s0.pred"
    p.write_bytes(blob)
    back = load_predictions(p)
    assert np.array_equal(back.probs, probs)


def test_prediction_bad_class_count():
    blob = struct.pack("<2I", 1, 8) + b"\x00" * 32
    with pytest.raises(ValueError, match="8 classes"):
        predictions_from_bytes(blob, scan_id="s0")


def test_prediction_size_mismatch():
    blob = struct.pack("<2I", 2, 9) + b"\x00" * 36  # header says 2 rows, one present
    with pytest.raises(ValueError, match="header implies"):
        predictions_from_bytes(blob, scan_id="s0")


def test_prediction_row_sum_error_reports_row_and_sum():
    probs = np.full((3, 9), 1.0 / 9.0, dtype=np.float32)
    probs[1] *= 0.5
    with pytest.raises(ValueError, match=r"row 1 sums to 0.5"):
        PredictionMatrix("s0", probs)


def test_prediction_out_of_range_entry():
    probs = np.zeros((1, 9), dtype=np.float32)
    probs[0, 0] = 1.5
    probs[0, 1] = -0.5
    with pytest.raises(ValueError, match="outside"):
        PredictionMatrix("s0", probs)


def test_argmax_labels_tie_breaks_low():
    probs = np.zeros((2, 9), dtype=np.float32)
    probs[0, [2, 5]] = 0.5  # tie between class ids 3 and 6
    probs[1, 8] = 1.0
    pred = PredictionMatrix("s0", probs)
    assert pred.argmax_labels().tolist() == [3, 9]


# ------------------------------------------------------------------ properties

finite32 = st.floats(
    min_value=-1e4, max_value=1e4, allow_nan=False, width=32
)


@st.composite
def cloud_strategy(draw):
    n = draw(st.integers(min_value=0, max_value=40))
    xyz = draw(
        st.lists(st.tuples(finite32, finite32, finite32), min_size=n, max_size=n)
    )
    intensity = draw(
        st.lists(st.floats(0, 1, allow_nan=False, width=32), min_size=n, max_size=n)
    )
    t_rel = draw(
        st.lists(
            st.floats(0, 0.2490234375, allow_nan=False, width=32),
            min_size=n,
            max_size=n,
        )
    )
    return _cloud(np.array(xyz, dtype=np.float64).reshape(n, 3), intensity, t_rel)


@settings(max_examples=100, deadline=None)
@given(cloud_strategy())
def test_cloud_roundtrip_property(c):
    blob = cloud_to_bytes(c)
    assert len(blob) == 20 * len(c)
    again = load_cloud_bytes_roundtrip(blob)
    assert again == blob


def load_cloud_bytes_roundtrip(blob, tmp=None):
    # byte-level identity: parse then re-serialize
    import io as _io

    rec = np.frombuffer(blob, dtype=np.dtype("<f4")).reshape(-1, 5)
    c = PointCloud("rt", 0.0, rec[:, :3], rec[:, 3], rec[:, 4])
    return cloud_to_bytes(c)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(
        st.tuples(st.sampled_from(range(10)), st.booleans()), min_size=0, max_size=60
    )
)
def test_labels_roundtrip_property(rows):
    ids = [r[0] for r in rows]
    prov = [int(r[1]) for r in rows]
    blob = labels_to_bytes(LabelArray("rt", ids, prov))
    again = labels_from_bytes(blob, scan_id="rt")
    assert labels_to_bytes(again) == blob
    assert again.labels.tolist() == ids
    assert again.provenance.tolist() == prov


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=0, max_value=30), st.randoms(use_true_random=False))
def test_predictions_roundtrip_property(n, rnd):
    rng = np.random.default_rng(rnd.randrange(2**32))
    probs = rng.dirichlet(np.ones(N_CLASSES_3D), size=n).astype(np.float32)
    blob = predictions_to_bytes(PredictionMatrix("rt", probs))
    again = predictions_from_bytes(blob, scan_id="rt")
    assert predictions_to_bytes(again) == blob
    assert np.array_equal(again.probs, probs)


def test_save_load_files_bit_exact(tmp_path):
    rng = np.random.default_rng(7)
    n = 500
    cloud = _cloud(
        rng.uniform(-50, 50, (n, 3)).astype(np.float32),
        rng.uniform(0, 1, n).astype(np.float32),
        rng.uniform(0, 0.2499, n).astype(np.float32),
    )
    labels = LabelArray("s0", rng.integers(0, 10, n), rng.integers(0, 2, n))
    pred = PredictionMatrix(
        "s0", rng.dirichlet(np.ones(9), size=n).astype(np.float32)
    )
    for obj, save, load in [
        (cloud, save_cloud, load_cloud),
        (labels, save_labels, load_labels),
        (pred, save_predictions, load_predictions),
    ]:
        p1 = tmp_path / "a.bin"
        p2 = tmp_path / "b.bin"
        save(obj, p1)
        save(load(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()
