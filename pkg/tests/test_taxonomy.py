import pytest

from railscan.taxonomy import (
    ClassSet,
    DEFAULT_CLASSES,
    DEFAULT_CLASS_MAP,
    N_CLASSES_3D,
    SemanticClass,
    THREE_D_CLASS_NAMES,
    UNLABELED_ID,
)


def test_default_taxonomy_shape():
    assert N_CLASSES_3D == 9
    assert DEFAULT_CLASSES.by_id(UNLABELED_ID).name == "UNLABELED"
    assert DEFAULT_CLASSES.three_d_ids == tuple(range(1, 10))
    names = tuple(DEFAULT_CLASSES.by_id(i).name for i in range(1, 10))
    assert names == THREE_D_CLASS_NAMES


def test_lookup_roundtrip():
    for c in DEFAULT_CLASSES:
        assert DEFAULT_CLASSES.by_id(c.id) is c
        assert DEFAULT_CLASSES.by_name(c.name) is c
    with pytest.raises(KeyError):
        DEFAULT_CLASSES.by_id(99)
    with pytest.raises(KeyError):
        DEFAULT_CLASSES.by_name("TRAIN")


def test_valid_point_label_ids_excludes_image_only():
    ids = DEFAULT_CLASSES.valid_point_label_ids()
    assert ids == (0, 1, 2, 3, 4, 5, 6, 7, 8, 9)
    sky = DEFAULT_CLASSES.by_name("SKY")
    assert not sky.is_3d and sky.id not in ids


def test_class_map_collapses_image_only_to_unlabeled():
    assert DEFAULT_CLASS_MAP["SKY"] == "UNLABELED"
    assert DEFAULT_CLASS_MAP["BACKGROUND"] == "UNLABELED"
    for name in THREE_D_CLASS_NAMES:
        assert DEFAULT_CLASS_MAP[name] == name


def test_serialization_roundtrip():
    again = ClassSet.from_dicts(DEFAULT_CLASSES.to_dicts())
    assert again == DEFAULT_CLASSES


def test_invalid_class_sets_rejected():
    base = list(DEFAULT_CLASSES.classes)
    with pytest.raises(ValueError):
        ClassSet(tuple(base[1:]))  # no UNLABELED
    swapped = base.copy()
    swapped[1], swapped[2] = (
        SemanticClass(1, "PERSON", True, (1, 2, 3)),
        SemanticClass(2, "ON_TRACKS", True, (4, 5, 6)),
    )
    with pytest.raises(ValueError):
        ClassSet(tuple(swapped))  # canonical order broken
    with pytest.raises(ValueError):
        ClassSet(tuple(base) + (SemanticClass(3, "EXTRA", False, (0, 0, 0)),))
