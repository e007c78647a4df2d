"""Cost matrices, gated minimum-cost assignment, and the two-stage cascade.

Assignment maximizes the number of admissible (within-gate) matches first and
minimizes total cost among those, which is what masking forbidden entries with
a large sentinel achieves under the Hungarian solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import BoundingBox, boxes_to_ltrb, expand_ltrb, iou_matrix

_FORBIDDEN = 1e6


@dataclass
class AssignmentResult:
    matches: list[tuple[int, int]]
    unmatched_rows: list[int]
    unmatched_cols: list[int]


def iou_cost(tracks: Sequence[BoundingBox], dets: Sequence[BoundingBox]) -> np.ndarray:
    """(T, D) matrix of 1 - IoU costs."""
    return 1.0 - iou_matrix(boxes_to_ltrb(tracks), boxes_to_ltrb(dets))


def biou_cost(
    tracks: Sequence[BoundingBox], dets: Sequence[BoundingBox], buffer_scale: float
) -> np.ndarray:
    """(T, D) matrix of 1 - IoU costs after symmetric expansion of both sides."""
    if buffer_scale < 0.0:
        raise ValueError("buffer_scale must be non-negative")
    a = expand_ltrb(boxes_to_ltrb(tracks), buffer_scale)
    b = expand_ltrb(boxes_to_ltrb(dets), buffer_scale)
    return 1.0 - iou_matrix(a, b)


def _canonicalize_ties(cost: np.ndarray, gate: float, matches: list[tuple[int, int]]) -> None:
    # Among cost-preserving 2-swaps, give the lower row index the lower column
    # index, so equal-cost optima come out in a stable documented order.
    changed = True
    while changed:
        changed = False
        for a in range(len(matches)):
            ra, ca = matches[a]
            for b in range(a + 1, len(matches)):
                rb, cb = matches[b]
                if cb >= ca:
                    continue
                if cost[ra, cb] > gate or cost[rb, ca] > gate:
                    continue
                if cost[ra, cb] + cost[rb, ca] == cost[ra, ca] + cost[rb, cb]:
                    matches[a] = (ra, cb)
                    matches[b] = (rb, ca)
                    ca, cb = cb, ca
                    changed = True


def assign(cost: np.ndarray, gate: float) -> AssignmentResult:
    """Gated minimum-cost assignment over a (rows, cols) cost matrix.

    Entries above ``gate`` are never matched. The result maximizes the number
    of admissible matches, then minimizes their total cost; ties resolve with
    the lowest row taking the lowest column.
    """
    rows, cols = cost.shape
    if rows == 0 or cols == 0:
        return AssignmentResult([], list(range(rows)), list(range(cols)))
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix must be finite")
    masked = np.where(cost > gate, _FORBIDDEN, cost)
    rr, cc = linear_sum_assignment(masked)
    matches = [(int(r), int(c)) for r, c in zip(rr, cc) if cost[r, c] <= gate]
    _canonicalize_ties(cost, gate, matches)
    matches.sort()
    matched_r = {r for r, _ in matches}
    matched_c = {c for _, c in matches}
    return AssignmentResult(
        matches=matches,
        unmatched_rows=[r for r in range(rows) if r not in matched_r],
        unmatched_cols=[c for c in range(cols) if c not in matched_c],
    )


@dataclass
class TwoStageResult:
    """Matches index into the concatenation of full-pool then lost-pool tracks."""

    matches: list[tuple[int, int]]
    unmatched_tracks: list[int]
    unmatched_dets: list[int]
    stage_one_matches: list[tuple[int, int]] = field(default_factory=list)
    stage_two_matches: list[tuple[int, int]] = field(default_factory=list)


def two_stage_associate(
    track_boxes: Sequence[BoundingBox],
    lost_boxes: Sequence[BoundingBox],
    det_boxes: Sequence[BoundingBox],
    det_scores: Sequence[float],
    *,
    conf_high: float = 0.6,
    conf_low: float = 0.1,
    gate_first: float = 0.8,
    gate_second: float = 0.5,
    buffer_scale: float = 0.3,
    refine_hook: Callable[["TwoStageResult"], "TwoStageResult"] | None = None,
) -> TwoStageResult:
    """Two-stage confidence cascade over one frame's detections.

    Stage one matches high-confidence detections against the union of active
    tracks and lost proposals by plain IoU. Stage two matches the still
    unmatched *active* tracks (lost proposals only get the first stage)
    against mid-confidence detections plus stage-one leftovers using buffered
    IoU. Detections below ``conf_low`` are ignored entirely.

    ``refine_hook`` is an optional appearance-based refinement slot; the
    default keeps the result untouched.
    """
    if not conf_low < conf_high:
        raise ValueError("conf_low must be below conf_high")
    n_tracks = len(track_boxes)
    candidates = list(track_boxes) + list(lost_boxes)
    scores = np.asarray(det_scores, dtype=np.float64)

    high_idx = [k for k, s in enumerate(scores) if s >= conf_high]
    mid_idx = [k for k, s in enumerate(scores) if conf_low <= s < conf_high]

    stage_one = assign(
        iou_cost(candidates, [det_boxes[k] for k in high_idx]), gate_first
    )
    matches = [(r, high_idx[c]) for r, c in stage_one.matches]
    leftovers_high = [high_idx[c] for c in stage_one.unmatched_cols]

    second_tracks = [r for r in stage_one.unmatched_rows if r < n_tracks]
    second_dets = sorted(mid_idx + leftovers_high)
    stage_two = assign(
        biou_cost(
            [candidates[r] for r in second_tracks],
            [det_boxes[k] for k in second_dets],
            buffer_scale,
        ),
        gate_second,
    )
    matches_two = [(second_tracks[r], second_dets[c]) for r, c in stage_two.matches]

    all_matches = sorted(matches + matches_two)
    matched_tracks = {r for r, _ in all_matches}
    matched_dets = {c for _, c in all_matches}
    unmatched_tracks = [r for r in range(len(candidates)) if r not in matched_tracks]
    unmatched_dets = [
        k for k, s in enumerate(scores) if s >= conf_low and k not in matched_dets
    ]
    result = TwoStageResult(
        matches=all_matches,
        unmatched_tracks=unmatched_tracks,
        unmatched_dets=unmatched_dets,
        stage_one_matches=matches,
        stage_two_matches=matches_two,
    )
    if refine_hook is not None:
        result = refine_hook(result)
    return result
