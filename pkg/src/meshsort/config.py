"""Dataclass configuration for the tracker and its feature toggles."""

from __future__ import annotations

from dataclasses import dataclass, fields

LM_OUTSIDE_FREQUENT = "outside_frequent"
LM_INSIDE_FREQUENT = "inside_frequent"


@dataclass
class LifecycleConfig:
    """Track lifecycle knobs.

    ``lost_maintain_frames`` is how long an unexpectedly lost track keeps
    feeding itself virtual proposals before it is parked as lost;
    ``location_age_reduction`` shortens the removal age of tracks lost inside
    frequent-loss cells.
    """

    lost_maintain_frames: int = 3
    max_age: int = 30
    location_age_reduction: int = 8
    min_hits: int = 3
    occlusion_iou: float = 0.3
    lm_region_rule: str = LM_OUTSIDE_FREQUENT

    def validate(self) -> None:
        if self.lost_maintain_frames < 0:
            raise ValueError("lost_maintain_frames must be >= 0")
        if not 0 <= self.location_age_reduction < self.max_age:
            raise ValueError("location_age_reduction must lie in [0, max_age)")
        if self.min_hits < 1:
            raise ValueError("min_hits must be >= 1")
        if self.lm_region_rule not in (LM_OUTSIDE_FREQUENT, LM_INSIDE_FREQUENT):
            raise ValueError(f"unknown lm_region_rule {self.lm_region_rule!r}")


@dataclass
class TrackerConfig(LifecycleConfig):
    """Full per-run configuration: lifecycle, mesh, association, and filter knobs."""

    frame_width: float = 1920.0
    frame_height: float = 1080.0

    enable_mesh: bool = True
    enable_lost_maintain: bool = True
    enable_velocity_rollback: bool = True
    enable_location_ages: bool = True

    mesh_cols: int = 4
    mesh_rows: int = 4
    mesh_threshold_slope: float = 0.02
    mesh_refresh_interval: int = 1

    conf_high: float = 0.6
    conf_low: float = 0.1
    init_conf: float = 0.7
    gate_first: float = 0.8
    gate_second: float = 0.5
    buffer_scale: float = 0.3

    vel_buffer_len: int = 5
    vel_rollback: str = "oldest"
    freeze_size_velocity: bool = False
    lm_noise_scale: float = 10.0
    pos_std_weight: float = 1.0 / 20.0
    vel_std_weight: float = 1.0 / 160.0

    emit_virtual: bool = False

    def validate(self) -> None:
        super().validate()
        if self.frame_width <= 0 or self.frame_height <= 0:
            raise ValueError("frame size must be positive")
        if self.mesh_cols < 1 or self.mesh_rows < 1:
            raise ValueError("mesh must have at least one cell per axis")
        if not self.conf_low < self.conf_high:
            raise ValueError("conf_low must be below conf_high")
        if not 1 <= self.vel_buffer_len <= 30:
            raise ValueError("vel_buffer_len must lie in [1, 30]")
        if self.vel_rollback not in ("oldest", "mean"):
            raise ValueError(f"unknown vel_rollback mode {self.vel_rollback!r}")
        if self.mesh_refresh_interval < 1:
            raise ValueError("mesh_refresh_interval must be >= 1")

    @classmethod
    def baseline(cls, **overrides) -> "TrackerConfig":
        """Plain two-stage tracker: every added mechanism switched off."""
        base = dict(
            enable_mesh=False,
            enable_lost_maintain=False,
            enable_velocity_rollback=False,
            enable_location_ages=False,
        )
        base.update(overrides)
        return cls(**base)

    @classmethod
    def field_types(cls) -> dict[str, type]:
        defaults = cls()
        return {f.name: type(getattr(defaults, f.name)) for f in fields(cls)}
