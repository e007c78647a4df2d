"""Track lifecycle: confirmation, lost maintenance, location-wise ages, removal.

A freshly spotted object starts Tentative and confirms after ``min_hits``
consecutive detections. A confirmed track that misses a detection is either
kept "maintained" for a few frames (when the loss looks like an unexpected
occlusion, i.e. outside the frequent-loss cells) or parked as Lost. Lost
tracks age out after ``max_age`` frames, reduced by ``location_age_reduction``
when the loss happened inside a frequent-loss cell.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Optional

from . import kalman
from .config import LM_OUTSIDE_FREQUENT, TrackerConfig
from .geometry import BoundingBox, bottom_middle, box_to_measurement, iou, measurement_to_box
from .mesh import CellId, MeshGrid

_MIN_BOX_SIZE = 1e-3


class TrackStatus(enum.Enum):
    TENTATIVE = "tentative"
    TRACKED = "tracked"
    LOST_MAINTAINED = "lost_maintained"
    LOST = "lost"
    REMOVED = "removed"


def state_box(state: kalman.KalmanState) -> BoundingBox:
    """Box view of a filter state; degenerate area/aspect is clamped to a sliver."""
    z = state.projected()
    z[2] = max(z[2], _MIN_BOX_SIZE)
    z[3] = max(z[3], _MIN_BOX_SIZE)
    return measurement_to_box(z)


@dataclass
class Track:
    track_id: int
    kf: kalman.KalmanState
    vel: kalman.VelocityBuffer
    status: TrackStatus = TrackStatus.TENTATIVE
    hits: int = 1
    lm_count: int = 0
    lost_count: int = 0
    lost_cell: Optional[CellId] = None
    last_box: Optional[BoundingBox] = None
    confidence: float = 0.0
    predicts_since_match: int = 0

    def predicted_box(self) -> BoundingBox:
        return state_box(self.kf)


def new_track(track_id: int, box: BoundingBox, conf: float, cfg: TrackerConfig,
              model: kalman.MotionModel) -> Track:
    state = kalman.initiate(box_to_measurement(box), model)
    status = TrackStatus.TRACKED if cfg.min_hits <= 1 else TrackStatus.TENTATIVE
    return Track(
        track_id=track_id,
        kf=state,
        vel=kalman.VelocityBuffer(capacity=cfg.vel_buffer_len),
        status=status,
        last_box=box,
        confidence=conf,
    )


def on_matched(
    track: Track,
    det_box: BoundingBox,
    det_conf: float,
    cfg: TrackerConfig,
    model: kalman.MotionModel,
    grid: MeshGrid | None,
) -> None:
    """Fold a real detection into the track and restore it to the tracked pool."""
    assert track.status is not TrackStatus.REMOVED
    was_lost = track.status is TrackStatus.LOST
    track.kf = kalman.update(track.kf, box_to_measurement(det_box), model)
    track.vel.record(track.kf)
    if was_lost and grid is not None and cfg.enable_mesh:
        # Refinds decrement at the refound location; a track lost in one cell
        # and refound in another leaves both counts shifted, which is allowed.
        grid.record_refound(bottom_middle(det_box))
    if track.status is TrackStatus.TENTATIVE:
        track.hits += 1
        if track.hits >= cfg.min_hits:
            track.status = TrackStatus.TRACKED
    else:
        track.status = TrackStatus.TRACKED
    track.lost_count = 0
    track.lm_count = 0
    track.lost_cell = None
    track.predicts_since_match = 0
    track.confidence = det_conf
    track.last_box = state_box(track.kf)


def lost_maintain_step(track: Track, cfg: TrackerConfig, model: kalman.MotionModel) -> None:
    """Feed the track its own projected prediction as a weak pseudo-observation.

    The zero innovation keeps the mean on its constant-velocity course while
    the inflated-noise update keeps the covariance from ballooning, so the
    virtual proposal stays matchable.
    """
    assert track.status is TrackStatus.LOST_MAINTAINED
    track.kf = kalman.update(track.kf, track.kf.projected(), model,
                             noise_scale=cfg.lm_noise_scale)
    track.last_box = state_box(track.kf)


def _lm_eligible(cell_in_frequent: bool, cfg: TrackerConfig) -> bool:
    if cfg.lm_region_rule == LM_OUTSIDE_FREQUENT:
        return not cell_in_frequent
    return cell_in_frequent


def _age_reduced(cell_in_frequent: bool, cfg: TrackerConfig) -> bool:
    if cfg.lm_region_rule == LM_OUTSIDE_FREQUENT:
        return cell_in_frequent
    return not cell_in_frequent


def on_missed(
    track: Track,
    cfg: TrackerConfig,
    model: kalman.MotionModel,
    grid: MeshGrid | None,
    frequent: frozenset[CellId],
) -> None:
    """Advance the lifecycle of a track that got no detection this frame."""
    assert track.status is not TrackStatus.REMOVED
    if track.status is TrackStatus.TENTATIVE:
        track.status = TrackStatus.REMOVED
        return

    cell = None
    if grid is not None:
        cell = grid.cell_of(bottom_middle(track.predicted_box()))
    in_frequent = cell is not None and cell in frequent

    maintain_ok = (
        cfg.enable_lost_maintain
        and track.status is not TrackStatus.LOST
        and track.lm_count < cfg.lost_maintain_frames
        and _lm_eligible(in_frequent, cfg)
    )
    if maintain_ok:
        track.status = TrackStatus.LOST_MAINTAINED
        track.lm_count += 1
        lost_maintain_step(track, cfg, model)
        return

    if track.status is not TrackStatus.LOST:
        # First frame in the lost pool: remember where it happened, roll the
        # velocity back past any pre-occlusion detector noise, and count the
        # loss in its cell.
        point = bottom_middle(track.last_box)
        if grid is not None:
            track.lost_cell = grid.cell_of(point)
            if cfg.enable_mesh:
                grid.record_lost(point)
        if cfg.enable_velocity_rollback:
            track.kf, _ = kalman.rollback_velocity(
                track.kf, track.vel, cfg.vel_rollback, cfg.freeze_size_velocity
            )
        track.status = TrackStatus.LOST
    track.lost_count += 1

    effective_age = cfg.max_age
    if (
        cfg.enable_location_ages
        and track.lost_cell is not None
        and _age_reduced(track.lost_cell in frequent, cfg)
    ):
        effective_age = cfg.max_age - cfg.location_age_reduction
    if track.lost_count >= effective_age:
        track.status = TrackStatus.REMOVED


def infer_occlusion(tracks: Iterable[Track], occlusion_iou: float) -> set[int]:
    """Ids of lost/maintained tracks whose prediction overlaps a tracked box.

    Those tracks are withheld from matching for the frame: their spot is
    plausibly covered by the overlapping object, so any detection there
    belongs to it, not to them. Overlap between two lost tracks is ignored.
    """
    tracks = list(tracks)
    tracked_boxes = [t.predicted_box() for t in tracks if t.status is TrackStatus.TRACKED]
    occluded: set[int] = set()
    for t in tracks:
        if t.status not in (TrackStatus.LOST, TrackStatus.LOST_MAINTAINED):
            continue
        box = t.predicted_box()
        if any(iou(box, tb) >= occlusion_iou for tb in tracked_boxes):
            occluded.add(t.track_id)
    return occluded
