"""Location-aware multi-object tracking: tracker, metrics, and scene tools."""

from .config import TrackerConfig
from .geometry import BoundingBox, Point2, bottom_middle, box_to_measurement, buffered_iou, iou, measurement_to_box
from .mesh import LossThreshold, MeshGrid, MeshSnapshot
from .metrics import MetricsReport, evaluate
from .pipeline import Detection, FrameDetections, FrameOutput, SequencingError, Tracker, run
from .synth import SceneConfig, generate, parse_scene

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "Detection",
    "FrameDetections",
    "FrameOutput",
    "LossThreshold",
    "MeshGrid",
    "MeshSnapshot",
    "MetricsReport",
    "Point2",
    "SceneConfig",
    "SequencingError",
    "Tracker",
    "TrackerConfig",
    "bottom_middle",
    "box_to_measurement",
    "buffered_iou",
    "evaluate",
    "generate",
    "iou",
    "measurement_to_box",
    "parse_scene",
    "run",
    "__version__",
]
