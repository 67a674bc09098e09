"""Semantic class taxonomy for railway scenes.

Point labels use ids 1..9 (the classes that exist in 3D); id 0 is reserved for
UNLABELED. Camera segmentation images may additionally contain image-only
classes (sky, background) which have no 3D extent and collapse to UNLABELED
when their pixels are sampled onto points.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Tuple

UNLABELED_ID = 0

# Names of the classes with 3D extent, in canonical id order (ids 1..9).
THREE_D_CLASS_NAMES = (
    "ON_TRACKS",
    "PERSON",
    "RAIL_TRACK",
    "TRACKBED",
    "CONSTRUCTION",
    "POLE",
    "SIGN",
    "VEGETATION",
    "TERRAIN",
)

N_CLASSES_3D = len(THREE_D_CLASS_NAMES)  # 9


@dataclass(frozen=True)
class SemanticClass:
    id: int
    name: str
    is_3d: bool
    color: Tuple[int, int, int]  # display RGB, also the palette of PNG exports


@dataclass(frozen=True)
class ClassSet:
    """Immutable, validated collection of semantic classes.

    Invariants enforced at construction: id 0 is UNLABELED and not 3D, the 3D
    classes are exactly THREE_D_CLASS_NAMES with ids 1..9 in that order, ids
    and names are unique, and every id fits in a u8 (label images are 8-bit).
    """

    classes: Tuple[SemanticClass, ...]
    _by_id: Dict[int, SemanticClass] = field(init=False, repr=False, compare=False)
    _by_name: Dict[str, SemanticClass] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        by_id = {c.id: c for c in self.classes}
        by_name = {c.name: c for c in self.classes}
        if len(by_id) != len(self.classes):
            raise ValueError("duplicate class ids")
        if len(by_name) != len(self.classes):
            raise ValueError("duplicate class names")
        if UNLABELED_ID not in by_id or by_id[UNLABELED_ID].name != "UNLABELED":
            raise ValueError("id 0 must be UNLABELED")
        if by_id[UNLABELED_ID].is_3d:
            raise ValueError("UNLABELED cannot be a 3D class")
        three_d = tuple(c for c in self.classes if c.is_3d)
        if tuple(c.name for c in three_d) != THREE_D_CLASS_NAMES:
            raise ValueError(
                "3D classes must be exactly %s in order" % (THREE_D_CLASS_NAMES,)
            )
        if tuple(c.id for c in three_d) != tuple(range(1, N_CLASSES_3D + 1)):
            raise ValueError("3D class ids must be 1..9 in canonical order")
        for c in self.classes:
            if not 0 <= c.id <= 255:
                raise ValueError(f"class id {c.id} does not fit in a u8")
        object.__setattr__(self, "_by_id", by_id)
        object.__setattr__(self, "_by_name", by_name)

    def __iter__(self):
        return iter(self.classes)

    def __len__(self):
        return len(self.classes)

    def __contains__(self, class_id: int) -> bool:
        return class_id in self._by_id

    def by_id(self, class_id: int) -> SemanticClass:
        try:
            return self._by_id[class_id]
        except KeyError:
            raise KeyError(f"unknown class id {class_id}") from None

    def by_name(self, name: str) -> SemanticClass:
        try:
            return self._by_name[name]
        except KeyError:
            raise KeyError(f"unknown class name {name!r}") from None

    @property
    def three_d_ids(self) -> Tuple[int, ...]:
        return tuple(range(1, N_CLASSES_3D + 1))

    @property
    def image_only_ids(self) -> Tuple[int, ...]:
        return tuple(c.id for c in self.classes if not c.is_3d and c.id != UNLABELED_ID)

    def valid_point_label_ids(self) -> Tuple[int, ...]:
        """Ids allowed in a point label array: UNLABELED plus the 3D classes."""
        return (UNLABELED_ID,) + self.three_d_ids

    def to_dicts(self):
        return [
            {"id": c.id, "name": c.name, "is_3d": c.is_3d, "color": list(c.color)}
            for c in self.classes
        ]

    @staticmethod
    def from_dicts(rows) -> "ClassSet":
        return ClassSet(
            tuple(
                SemanticClass(
                    int(r["id"]), str(r["name"]), bool(r["is_3d"]), tuple(r["color"])
                )
                for r in rows
            )
        )


DEFAULT_CLASSES = ClassSet(
    (
        SemanticClass(0, "UNLABELED", False, (45, 45, 45)),
        SemanticClass(1, "ON_TRACKS", True, (220, 50, 50)),
        SemanticClass(2, "PERSON", True, (255, 140, 0)),
        SemanticClass(3, "RAIL_TRACK", True, (0, 150, 255)),
        SemanticClass(4, "TRACKBED", True, (140, 100, 60)),
        SemanticClass(5, "CONSTRUCTION", True, (210, 200, 40)),
        SemanticClass(6, "POLE", True, (150, 60, 200)),
        SemanticClass(7, "SIGN", True, (255, 0, 200)),
        SemanticClass(8, "VEGETATION", True, (50, 170, 70)),
        SemanticClass(9, "TERRAIN", True, (150, 220, 130)),
        SemanticClass(10, "SKY", False, (135, 206, 235)),
        SemanticClass(11, "BACKGROUND", False, (100, 100, 100)),
    )
)

# Image class name -> 3D class name applied when sampling image pixels onto
# points. Identity for the 3D classes; image-only classes collapse to UNLABELED.
DEFAULT_CLASS_MAP = {
    **{name: name for name in THREE_D_CLASS_NAMES},
    "SKY": "UNLABELED",
    "BACKGROUND": "UNLABELED",
    "UNLABELED": "UNLABELED",
}
