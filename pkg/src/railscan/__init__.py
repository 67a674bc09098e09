"""railscan: semi-automated annotation tooling for railway LiDAR point clouds.

The package covers the full loop: raw sweep preprocessing (reflection and
outlier removal, camera sync, ego-motion de-distortion), label transfer from
camera segmentation images, human correction bookkeeping, uncertainty-driven
scan selection for annotation, and IoU evaluation, plus a manifest-backed
dataset service exposing everything over HTTP for the annotation UI.
"""

from .taxonomy import (
    ClassSet,
    DEFAULT_CLASSES,
    DEFAULT_CLASS_MAP,
    N_CLASSES_3D,
    SemanticClass,
    THREE_D_CLASS_NAMES,
    UNLABELED_ID,
)
from .cloud import (
    LabelArray,
    PointCloud,
    PredictionMatrix,
    PROVENANCE_AUTO,
    PROVENANCE_CORRECTED,
    load_cloud,
    load_labels,
    load_predictions,
    save_cloud,
    save_labels,
    save_predictions,
)
from .manifest import DatasetManifest, ImageEntry, ScanEntry, ScanStatus
from .synth import (
    SynthScene,
    SynthSceneConfig,
    default_synth_camera,
    scaled_densities,
    synth_dataset,
    synth_scene,
)
from .selection import (
    ScanScore,
    SelectionConfig,
    SelectionResult,
    point_entropy,
    point_uncertainty,
    rank_scans,
    score_scan,
    select_for_labeling,
)

__version__ = "0.1.0"

__all__ = [
    "ClassSet",
    "DEFAULT_CLASSES",
    "DEFAULT_CLASS_MAP",
    "N_CLASSES_3D",
    "SemanticClass",
    "THREE_D_CLASS_NAMES",
    "UNLABELED_ID",
    "LabelArray",
    "PointCloud",
    "PredictionMatrix",
    "PROVENANCE_AUTO",
    "PROVENANCE_CORRECTED",
    "load_cloud",
    "load_labels",
    "load_predictions",
    "save_cloud",
    "save_labels",
    "save_predictions",
    "DatasetManifest",
    "ImageEntry",
    "ScanEntry",
    "ScanStatus",
    "ScanScore",
    "SelectionConfig",
    "SelectionResult",
    "point_entropy",
    "point_uncertainty",
    "rank_scans",
    "score_scan",
    "select_for_labeling",
    "SynthScene",
    "SynthSceneConfig",
    "default_synth_camera",
    "scaled_densities",
    "synth_dataset",
    "synth_scene",
    "__version__",
]
