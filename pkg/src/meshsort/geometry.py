"""Axis-aligned box geometry shared by the tracker, metrics, and scene tools."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np


class Point2(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class BoundingBox:
    """Rectangle in continuous pixel coordinates, stored as top-left corner plus size.

    Width and height must be strictly positive; sub-pixel values are kept as-is
    because overlap tests and the motion filter both need continuous coordinates.
    """

    left: float
    top: float
    width: float
    height: float

    def __post_init__(self):
        for v in (self.left, self.top, self.width, self.height):
            if not math.isfinite(v):
                raise ValueError(f"non-finite box field in {self!r}")
        if self.width <= 0.0 or self.height <= 0.0:
            raise ValueError(f"box requires positive width and height, got {self!r}")

    @property
    def right(self) -> float:
        return self.left + self.width

    @property
    def bottom(self) -> float:
        return self.top + self.height

    @property
    def area(self) -> float:
        return self.width * self.height

    def expanded(self, scale: float) -> "BoundingBox":
        """Grow symmetrically about the center by ``scale`` times each dimension per side."""
        if scale < 0.0:
            raise ValueError("expansion scale must be non-negative")
        return BoundingBox(
            self.left - scale * self.width,
            self.top - scale * self.height,
            self.width * (1.0 + 2.0 * scale),
            self.height * (1.0 + 2.0 * scale),
        )

    def as_ltwh(self) -> tuple[float, float, float, float]:
        return (self.left, self.top, self.width, self.height)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection-over-union of two boxes; 0 when disjoint, 1 when identical."""
    ix = min(a.right, b.right) - max(a.left, b.left)
    iy = min(a.bottom, b.bottom) - max(a.top, b.top)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    # Clamp: right-left can exceed width by an ulp, nudging the ratio past 1.
    return min(inter / (a.area + b.area - inter), 1.0)


def buffered_iou(a: BoundingBox, b: BoundingBox, buffer_scale: float) -> float:
    """IoU after both boxes are symmetrically expanded by ``buffer_scale`` per side.

    A zero scale reduces to plain :func:`iou`; larger scales tolerate motion gaps
    between a stale prediction and a detection.
    """
    if buffer_scale == 0.0:
        return iou(a, b)
    return iou(a.expanded(buffer_scale), b.expanded(buffer_scale))


def bottom_middle(b: BoundingBox) -> Point2:
    """Bottom-center point of a box, the anchor used for grid cell lookups."""
    return Point2(b.left + b.width / 2.0, b.top + b.height)


def box_to_measurement(b: BoundingBox) -> np.ndarray:
    """Convert a box to the filter measurement [center_x, center_y, area, aspect].

    Aspect is width/height, area is width*height.
    """
    return np.array(
        [
            b.left + b.width / 2.0,
            b.top + b.height / 2.0,
            b.width * b.height,
            b.width / b.height,
        ],
        dtype=np.float64,
    )


def measurement_to_box(z: Sequence[float]) -> BoundingBox:
    """Inverse of :func:`box_to_measurement`; rejects non-positive area or aspect."""
    xc, yc, area, aspect = float(z[0]), float(z[1]), float(z[2]), float(z[3])
    if area <= 0.0 or aspect <= 0.0:
        raise ValueError(f"measurement needs positive area and aspect, got {area}, {aspect}")
    w = math.sqrt(area * aspect)
    h = math.sqrt(area / aspect)
    return BoundingBox(xc - w / 2.0, yc - h / 2.0, w, h)


def boxes_to_ltrb(boxes: Sequence[BoundingBox]) -> np.ndarray:
    """Stack boxes into an (N, 4) array of [left, top, right, bottom] rows."""
    if not boxes:
        return np.zeros((0, 4), dtype=np.float64)
    return np.array([(b.left, b.top, b.right, b.bottom) for b in boxes], dtype=np.float64)


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU of two (N, 4) / (M, 4) arrays in [left, top, right, bottom] form."""
    if a.shape[0] == 0 or b.shape[0] == 0:
        return np.zeros((a.shape[0], b.shape[0]), dtype=np.float64)
    a = a[:, None, :]
    b = b[None, :, :]
    iw = np.minimum(a[..., 2], b[..., 2]) - np.maximum(a[..., 0], b[..., 0])
    ih = np.minimum(a[..., 3], b[..., 3]) - np.maximum(a[..., 1], b[..., 1])
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    area_a = (a[..., 2] - a[..., 0]) * (a[..., 3] - a[..., 1])
    area_b = (b[..., 2] - b[..., 0]) * (b[..., 3] - b[..., 1])
    return np.minimum(inter / (area_a + area_b - inter), 1.0)


def expand_ltrb(boxes: np.ndarray, scale: float) -> np.ndarray:
    """Symmetric per-side expansion of an (N, 4) ltrb array, mirroring ``BoundingBox.expanded``."""
    if boxes.shape[0] == 0 or scale == 0.0:
        return boxes
    w = boxes[:, 2] - boxes[:, 0]
    h = boxes[:, 3] - boxes[:, 1]
    out = boxes.copy()
    out[:, 0] -= scale * w
    out[:, 1] -= scale * h
    out[:, 2] += scale * w
    out[:, 3] += scale * h
    return out
