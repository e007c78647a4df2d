"""Per-frame orchestration: predict, occlusion inference, cascade, lifecycle.

One :class:`Tracker` instance owns one sequence and is strictly
single-threaded; independent sequences run in parallel with one instance
each. The per-frame flow is:

1. advance every live track's filter one frame
2. flag lost/maintained tracks whose spot is covered by a tracked box
3. run the two-stage confidence cascade (lost proposals join stage one)
4. spawn tentative tracks from leftover confident detections
5. apply matched/missed lifecycle updates, emitting grid loss/refind events
6. refresh the frequent-loss cells (consumed by the *next* frame's lifecycle)
7. emit the frame output
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

from . import kalman, tracks as _tracks
from .association import two_stage_associate
from .config import TrackerConfig
from .geometry import BoundingBox
from .mesh import LossThreshold, MeshGrid
from .tracks import Track, TrackStatus


class SequencingError(ValueError):
    """Frame indices fed to a tracker must be strictly increasing."""


class Detection(NamedTuple):
    box: BoundingBox
    score: float


class OutputRecord(NamedTuple):
    track_id: int
    box: BoundingBox
    score: float


@dataclass(frozen=True)
class FrameDetections:
    index: int
    detections: tuple[Detection, ...]

    def __post_init__(self):
        if self.index < 1:
            raise ValueError("frame indices start at 1")
        for det in self.detections:
            if not 0.0 <= det.score <= 1.0:
                raise ValueError(f"confidence outside [0, 1]: {det.score}")


@dataclass(frozen=True)
class FrameOutput:
    index: int
    records: tuple[OutputRecord, ...]


@dataclass
class TrackerStats:
    """Cheap per-run instrumentation used by the benchmark and ablation runs."""

    frames: int = 0
    predicts: int = 0
    doomed_predicts: int = 0
    spawned: int = 0
    removed: int = 0


class Tracker:
    """Streaming tracker: feed :class:`FrameDetections`, get :class:`FrameOutput`.

    ``refine_hook`` is an optional appearance-based refinement applied to each
    frame's association result; there is no feature source here, so the
    default leaves results untouched.
    """

    def __init__(self, cfg: TrackerConfig, refine_hook=None):
        cfg.validate()
        self.cfg = cfg
        self.refine_hook = refine_hook
        self.model = kalman.MotionModel(cfg.pos_std_weight, cfg.vel_std_weight)
        self.grid = MeshGrid(
            cfg.mesh_cols, cfg.mesh_rows, (cfg.frame_width, cfg.frame_height)
        )
        self.threshold = LossThreshold(cfg.mesh_threshold_slope)
        self.tracks: list[Track] = []
        self._next_id = 1
        self._last_frame = 0
        self._stats = TrackerStats()

    @property
    def frequent_cells(self):
        return self.grid.frequent

    def stats(self) -> TrackerStats:
        """Snapshot of run counters; pending lost work of live tracks included."""
        out = TrackerStats(**vars(self._stats))
        for t in self.tracks:
            if t.status in (TrackStatus.LOST, TrackStatus.LOST_MAINTAINED):
                out.doomed_predicts += t.predicts_since_match
        return out

    def step(self, fd: FrameDetections) -> FrameOutput:
        if fd.index <= self._last_frame:
            raise SequencingError(
                f"frame {fd.index} does not follow frame {self._last_frame}"
            )
        self._last_frame = fd.index
        cfg = self.cfg

        live = [t for t in self.tracks if t.status is not TrackStatus.REMOVED]
        for t in live:
            t.kf = kalman.predict(t.kf, self.model)
            t.predicts_since_match += 1
            self._stats.predicts += 1

        occluded = _tracks.infer_occlusion(live, cfg.occlusion_iou)

        full_pool = [
            t
            for t in live
            if t.status in (TrackStatus.TRACKED, TrackStatus.TENTATIVE)
            or (t.status is TrackStatus.LOST_MAINTAINED and t.track_id not in occluded)
        ]
        lost_pool = [
            t
            for t in live
            if t.status is TrackStatus.LOST and t.track_id not in occluded
        ]
        candidates = full_pool + lost_pool

        det_boxes = [d.box for d in fd.detections]
        det_scores = [d.score for d in fd.detections]
        result = two_stage_associate(
            [t.predicted_box() for t in full_pool],
            [t.predicted_box() for t in lost_pool],
            det_boxes,
            det_scores,
            conf_high=cfg.conf_high,
            conf_low=cfg.conf_low,
            gate_first=cfg.gate_first,
            gate_second=cfg.gate_second,
            buffer_scale=cfg.buffer_scale,
            refine_hook=self.refine_hook,
        )

        grid = self.grid if cfg.enable_mesh else None
        matched_ids = set()
        for cand_idx, det_idx in result.matches:
            track = candidates[cand_idx]
            _tracks.on_matched(
                track, det_boxes[det_idx], det_scores[det_idx], cfg, self.model, grid
            )
            matched_ids.add(track.track_id)

        matched_dets = {d for _, d in result.matches}
        for det_idx, det in enumerate(fd.detections):
            if (
                det_idx not in matched_dets
                and det.score >= cfg.init_conf
                and det.score >= cfg.conf_low
            ):
                self.tracks.append(
                    _tracks.new_track(self._next_id, det.box, det.score, cfg, self.model)
                )
                self._next_id += 1
                self._stats.spawned += 1

        frequent = self.grid.frequent
        for t in live:
            if t.track_id in matched_ids:
                continue
            # The mesh cell lookup inside on_missed still works when the mesh
            # feature is off; only event recording and the frequent set react
            # to the toggle.
            _tracks.on_missed(t, cfg, self.model, self.grid, frequent)
            if t.status is TrackStatus.REMOVED:
                self._stats.removed += 1
                self._stats.doomed_predicts += t.predicts_since_match

        if cfg.enable_mesh and fd.index % cfg.mesh_refresh_interval == 0:
            self.grid.identify(self.threshold, fd.index)

        self.tracks = [t for t in self.tracks if t.status is not TrackStatus.REMOVED]
        self._stats.frames += 1

        records = [
            OutputRecord(t.track_id, t.last_box, t.confidence)
            for t in self.tracks
            if t.status is TrackStatus.TRACKED
        ]
        if cfg.emit_virtual:
            records.extend(
                OutputRecord(t.track_id, t.last_box, t.confidence)
                for t in self.tracks
                if t.status is TrackStatus.LOST_MAINTAINED
            )
        records.sort(key=lambda r: r.track_id)
        ids = [r.track_id for r in records]
        assert len(ids) == len(set(ids)), "duplicate track id in frame output"
        return FrameOutput(index=fd.index, records=tuple(records))


def run(cfg: TrackerConfig, frames: Iterable[FrameDetections]) -> list[FrameOutput]:
    """Fold a detection sequence through a fresh tracker."""
    tracker = Tracker(cfg)
    return [tracker.step(fd) for fd in frames]


def make_frame(index: int, dets: Sequence[tuple[BoundingBox, float]]) -> FrameDetections:
    return FrameDetections(
        index=index, detections=tuple(Detection(b, s) for b, s in dets)
    )
