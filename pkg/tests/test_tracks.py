import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from meshsort import kalman as K
from meshsort.config import TrackerConfig
from meshsort.geometry import BoundingBox, bottom_middle
from meshsort.mesh import MeshGrid
from meshsort.tracks import (
    TrackStatus,
    infer_occlusion,
    new_track,
    on_matched,
    on_missed,
)


def cfg(**kw):
    base = dict(frame_width=1920.0, frame_height=1080.0)
    base.update(kw)
    c = TrackerConfig(**base)
    c.validate()
    return c


def grid():
    return MeshGrid(4, 4, (1920.0, 1080.0), log_events=True)


def box(l=100, t=100, w=20, h=40):
    return BoundingBox(l, t, w, h)


def make_tracked(c, b=None, model=None):
    model = model or K.MotionModel()
    t = new_track(1, b or box(), 0.9, c, model)
    t.status = TrackStatus.TRACKED
    t.hits = c.min_hits
    return t, model


class TestOnMatched:
    def test_tracked_stays_tracked(self):
        c = cfg()
        t, model = make_tracked(c)
        on_matched(t, box(102), 0.8, c, model, grid())
        assert t.status is TrackStatus.TRACKED
        assert t.lost_count == 0
        assert t.confidence == 0.8

    def test_lost_match_emits_one_refound(self):
        c = cfg()
        t, model = make_tracked(c)
        g = grid()
        t.status = TrackStatus.LOST
        t.lost_count = 4
        on_matched(t, box(102), 0.8, c, model, g)
        assert t.status is TrackStatus.TRACKED
        assert [kind for kind, _ in g.events] == ["refound"]
        cell = g.cell_of(bottom_middle(box(102)))
        assert g.counts[cell] == -1

    def test_maintained_match_emits_no_event(self):
        # A maintained track never entered the lost pool, so finding it again
        # must not decrement anything.
        c = cfg()
        t, model = make_tracked(c)
        t.status = TrackStatus.LOST_MAINTAINED
        t.lm_count = 2
        g = grid()
        on_matched(t, box(102), 0.8, c, model, g)
        assert t.status is TrackStatus.TRACKED
        assert g.events == []
        assert t.lm_count == 0

    def test_tentative_confirms_at_min_hits(self):
        c = cfg(min_hits=3)
        model = K.MotionModel()
        t = new_track(1, box(), 0.9, c, model)
        assert t.status is TrackStatus.TENTATIVE and t.hits == 1
        on_matched(t, box(101), 0.9, c, model, grid())
        assert t.status is TrackStatus.TENTATIVE and t.hits == 2
        on_matched(t, box(102), 0.9, c, model, grid())
        assert t.status is TrackStatus.TRACKED

    def test_min_hits_one_confirms_at_birth(self):
        c = cfg(min_hits=1)
        t = new_track(1, box(), 0.9, c, K.MotionModel())
        assert t.status is TrackStatus.TRACKED

    def test_velocity_recorded_on_real_update(self):
        c = cfg()
        t, model = make_tracked(c)
        assert len(t.vel) == 0
        on_matched(t, box(104), 0.9, c, model, grid())
        assert len(t.vel) == 1


class TestOnMissed:
    def test_first_miss_outside_frequent_maintains(self):
        c = cfg(lost_maintain_frames=3)
        t, model = make_tracked(c)
        on_missed(t, c, model, grid(), frozenset())
        assert t.status is TrackStatus.LOST_MAINTAINED
        assert t.lm_count == 1

    def test_miss_inside_frequent_goes_lost_with_event(self):
        c = cfg(lost_maintain_frames=3)
        t, model = make_tracked(c)
        g = grid()
        frequent = frozenset({g.cell_of(bottom_middle(t.last_box))})
        on_missed(t, c, model, g, frequent)
        assert t.status is TrackStatus.LOST
        assert [kind for kind, _ in g.events] == ["lost"]
        assert t.lost_cell in frequent

    def test_budget_exhaustion_transitions_to_lost(self):
        c = cfg(lost_maintain_frames=2)
        t, model = make_tracked(c)
        g = grid()
        on_missed(t, c, model, g, frozenset())
        on_missed(t, c, model, g, frozenset())
        assert t.status is TrackStatus.LOST_MAINTAINED
        on_missed(t, c, model, g, frozenset())
        assert t.status is TrackStatus.LOST
        assert [kind for kind, _ in g.events] == ["lost"]

    def test_frequent_cell_removal_after_reduced_age(self):
        c = cfg(lost_maintain_frames=3, max_age=30, location_age_reduction=8)
        t, model = make_tracked(c)
        g = grid()
        frequent = frozenset({g.cell_of(bottom_middle(t.last_box))})
        for k in range(22):
            assert t.status is not TrackStatus.REMOVED
            on_missed(t, c, model, g, frequent)
        assert t.status is TrackStatus.REMOVED
        assert t.lost_count == 22

    def test_normal_cell_removal_after_max_age(self):
        c = cfg(lost_maintain_frames=0, enable_lost_maintain=False, max_age=30)
        t, model = make_tracked(c)
        g = grid()
        for k in range(29):
            on_missed(t, c, model, g, frozenset())
            assert t.status is TrackStatus.LOST
        on_missed(t, c, model, g, frozenset())
        assert t.status is TrackStatus.REMOVED

    def test_zero_budget_skips_maintain(self):
        c = cfg(lost_maintain_frames=0)
        t, model = make_tracked(c)
        on_missed(t, c, model, grid(), frozenset())
        assert t.status is TrackStatus.LOST

    def test_tentative_missed_once_removed(self):
        c = cfg(min_hits=3)
        t = new_track(1, box(), 0.9, c, K.MotionModel())
        on_missed(t, c, K.MotionModel(), grid(), frozenset())
        assert t.status is TrackStatus.REMOVED

    def test_rollback_fires_on_lost_transition(self):
        c = cfg(lost_maintain_frames=0, enable_lost_maintain=False)
        t, model = make_tracked(c)
        # Seed the buffer with a distinctive old velocity, then change it.
        t.kf = K.KalmanState(
            mean=np.r_[t.kf.mean[:4], [7.0, 0, 0, 0]], covariance=t.kf.covariance
        )
        t.vel.record(t.kf)
        t.kf = K.KalmanState(
            mean=np.r_[t.kf.mean[:4], [99.0, 0, 0, 0]], covariance=t.kf.covariance
        )
        on_missed(t, c, model, grid(), frozenset())
        assert t.kf.mean[4] == 7.0

    def test_rollback_respects_toggle(self):
        c = cfg(lost_maintain_frames=0, enable_lost_maintain=False,
                enable_velocity_rollback=False)
        t, model = make_tracked(c)
        t.vel.record(t.kf)
        t.kf = K.KalmanState(
            mean=np.r_[t.kf.mean[:4], [99.0, 0, 0, 0]], covariance=t.kf.covariance
        )
        on_missed(t, c, model, grid(), frozenset())
        assert t.kf.mean[4] == 99.0

    def test_inverted_region_rule(self):
        c = cfg(lm_region_rule="inside_frequent")
        t, model = make_tracked(c)
        g = grid()
        frequent = frozenset({g.cell_of(bottom_middle(t.last_box))})
        on_missed(t, c, model, g, frequent)
        assert t.status is TrackStatus.LOST_MAINTAINED


class TestLostMaintainStep:
    def test_three_maintained_frames_follow_pure_prediction(self):
        c = cfg()
        model = K.MotionModel()
        t, _ = make_tracked(c, model=model)
        t.kf = K.KalmanState(
            mean=np.r_[t.kf.mean[:4], [4.0, 2.0, 0, 0]], covariance=t.kf.covariance
        )
        reference = t.kf
        for _ in range(3):
            reference = K.predict(reference, model)
            t.kf = K.predict(t.kf, model)
            on_missed(t, c, model, grid(), frozenset())
            assert t.status is TrackStatus.LOST_MAINTAINED
            np.testing.assert_allclose(t.kf.mean, reference.mean, atol=1e-6)

    def test_lm_count_increments_once_per_miss(self):
        c = cfg()
        t, model = make_tracked(c)
        for k in range(1, 4):
            on_missed(t, c, model, grid(), frozenset())
            assert t.lm_count == k

    def test_covariance_stays_psd(self):
        c = cfg()
        t, model = make_tracked(c)
        for _ in range(3):
            t.kf = K.predict(t.kf, model)
            on_missed(t, c, model, grid(), frozenset())
            cov = t.kf.covariance
            assert np.max(np.abs(cov - cov.T)) <= 1e-9
            assert np.min(np.linalg.eigvalsh(cov)) >= -1e-9

    def test_virtual_box_set_for_matching(self):
        c = cfg()
        t, model = make_tracked(c)
        t.kf = K.KalmanState(
            mean=np.r_[t.kf.mean[:4], [10.0, 0, 0, 0]], covariance=t.kf.covariance
        )
        before = t.last_box
        t.kf = K.predict(t.kf, model)
        on_missed(t, c, model, grid(), frozenset())
        assert t.last_box.left == pytest.approx(before.left + 10.0, abs=1e-6)


def _mk(status, b, tid):
    c = cfg()
    t = new_track(tid, b, 0.9, c, K.MotionModel())
    t.status = status
    return t


class TestInferOcclusion:
    def test_fully_overlapped_lost_track_flagged(self):
        lost = _mk(TrackStatus.LOST, box(100, 100), 1)
        tracked = _mk(TrackStatus.TRACKED, box(100, 100), 2)
        assert infer_occlusion([lost, tracked], 0.3) == {1}

    def test_isolated_lost_track_not_flagged(self):
        lost = _mk(TrackStatus.LOST, box(100, 100), 1)
        tracked = _mk(TrackStatus.TRACKED, box(800, 400), 2)
        assert infer_occlusion([lost, tracked], 0.3) == set()

    def test_lost_lost_overlap_does_not_count(self):
        a = _mk(TrackStatus.LOST, box(100, 100), 1)
        b = _mk(TrackStatus.LOST, box(100, 100), 2)
        assert infer_occlusion([a, b], 0.3) == set()

    def test_maintained_tracks_also_flagged(self):
        lm = _mk(TrackStatus.LOST_MAINTAINED, box(100, 100), 1)
        tracked = _mk(TrackStatus.TRACKED, box(105, 100), 2)
        assert infer_occlusion([lm, tracked], 0.3) == {1}


ALLOWED_EDGES = {
    (TrackStatus.TENTATIVE, TrackStatus.TENTATIVE),
    (TrackStatus.TENTATIVE, TrackStatus.TRACKED),
    (TrackStatus.TENTATIVE, TrackStatus.REMOVED),
    (TrackStatus.TRACKED, TrackStatus.TRACKED),
    (TrackStatus.TRACKED, TrackStatus.LOST_MAINTAINED),
    (TrackStatus.TRACKED, TrackStatus.LOST),
    (TrackStatus.LOST_MAINTAINED, TrackStatus.TRACKED),
    (TrackStatus.LOST_MAINTAINED, TrackStatus.LOST_MAINTAINED),
    (TrackStatus.LOST_MAINTAINED, TrackStatus.LOST),
    (TrackStatus.LOST, TrackStatus.TRACKED),
    (TrackStatus.LOST, TrackStatus.LOST),
    (TrackStatus.LOST, TrackStatus.REMOVED),
}


class TestTransitionGraph:
    @settings(max_examples=80, deadline=None)
    @given(
        outcomes=st.lists(st.booleans(), min_size=1, max_size=60),
        l=st.integers(0, 4),
        min_hits=st.integers(1, 3),
        frequent=st.booleans(),
    )
    def test_only_allowed_edges(self, outcomes, l, min_hits, frequent):
        c = cfg(lost_maintain_frames=l, enable_lost_maintain=l > 0,
                min_hits=min_hits, max_age=10, location_age_reduction=4)
        model = K.MotionModel()
        t = new_track(1, box(), 0.9, c, model)
        g = grid()
        cells = frozenset({g.cell_of(bottom_middle(t.last_box))}) if frequent else frozenset()
        prev = t.status
        for matched in outcomes:
            if t.status is TrackStatus.REMOVED:
                break
            t.kf = K.predict(t.kf, model)
            if matched:
                on_matched(t, t.predicted_box(), 0.9, c, model, g)
            else:
                on_missed(t, c, model, g, cells)
            assert (prev, t.status) in ALLOWED_EDGES, (prev, t.status)
            prev = t.status
