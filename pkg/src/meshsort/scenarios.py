"""Seeded scene families that reproduce the tracker's target failure modes.

Three families, all desk-scale and deterministic per seed:

* transient occlusions behind thin pillars (bridging / fragmentation)
* exit-heavy flows that concentrate permanent losses in border cells
* a single target passing behind a wide slab with noisy semi-occluded
  detections right before the gap (velocity corruption)
"""

from __future__ import annotations

from .geometry import BoundingBox
from .synth import AgentSpec, SceneConfig, Xoshiro256StarStar

FRAME_W = 960.0
FRAME_H = 540.0


def _jitter(rng: Xoshiro256StarStar, lo: float, hi: float) -> float:
    return lo + (hi - lo) * rng.uniform()


def transient_occlusion_scene(seed: int) -> SceneConfig:
    """Thin pillars briefly hide a few fast walkers among easy bystanders.

    The bystanders never meet a pillar and supply steady tracking mass; two
    short-lived walkers sit near the mostly-tracked coverage boundary, and
    one walker vanishes while hidden so any virtual boxes emitted for it go
    unpaid. Walker speed versus pillar width keeps full dropouts within a
    small maintain budget.
    """
    rng = Xoshiro256StarStar(seed * 7919 + 13)
    frames = 110
    pillar_w = 34.0
    occluders = [
        BoundingBox(_jitter(rng, 320, 340), 0.0, pillar_w, FRAME_H),
        BoundingBox(_jitter(rng, 610, 630), 0.0, pillar_w, FRAME_H),
    ]
    agents = []
    # Eight bystanders far from the pillars, in side bands the walkers never
    # enter; slight vertical bob keeps their motion non-trivial.
    rows = [40.0, 95.0, 150.0, 205.0, 260.0, 315.0, 370.0, 425.0]
    for k, y in enumerate(rows):
        if k % 2 == 0:
            x = _jitter(rng, 60, 170)
        else:
            x = _jitter(rng, 760, 900)
        agents.append(
            AgentSpec(
                spawn=1,
                despawn=frames,
                width=22.0,
                height=46.0,
                waypoints=(
                    (1, x, y),
                    (frames // 2, x, y + _jitter(rng, 10, 24)),
                    (frames, x, y),
                ),
            )
        )
    # Two short-lived walkers, one per pillar, spanning just enough frames
    # that a few hidden frames decide their coverage ratio.
    for k in range(2):
        occ = occluders[k]
        span = 26
        spawn = int(_jitter(rng, 15, 55)) + 20 * k
        speed = _jitter(rng, 10.0, 12.0)
        cross_x = occ.left + occ.width / 2
        x0 = cross_x - speed * (span // 2)
        x1 = cross_x + speed * (span - span // 2)
        y = 100.0 + 220.0 * k + _jitter(rng, -10, 10)
        agents.append(
            AgentSpec(
                spawn=spawn,
                despawn=spawn + span,
                width=22.0,
                height=46.0,
                waypoints=((spawn, x0, y), (spawn + span, x1, y)),
            )
        )
    # One walker that vanishes mid-pillar.
    occ = occluders[1]
    spawn = int(_jitter(rng, 10, 30))
    speed = 10.0
    start_x = occ.left + occ.width / 2 - speed * 20
    end_frame = spawn + 22
    agents.append(
        AgentSpec(
            spawn=spawn,
            despawn=end_frame,
            width=22.0,
            height=46.0,
            waypoints=((spawn, start_x, 480.0), (end_frame, start_x + speed * 22, 480.0)),
        )
    )
    return SceneConfig(
        frame_width=FRAME_W,
        frame_height=FRAME_H,
        frames=frames,
        seed=seed,
        sigma_area=0.12,
        sigma_ratio=0.08,
        min_visibility=0.3,
        miss_prob=0.0,
        conf_base=0.9,
        conf_penalty=0.8,
        agents=agents,
        occluders=occluders,
    )


def exit_scene(seed: int) -> SceneConfig:
    """Staggered walkers streaming out of the right frame edge.

    Each agent despawns once fully outside, so its track is never refound and
    the right border cells accumulate unreturned losses.
    """
    rng = Xoshiro256StarStar(seed * 104729 + 7)
    frames = 300
    agents = []
    n_exits = 13
    for k in range(n_exits):
        spawn = 1 + k * 20
        speed = _jitter(rng, 10.0, 13.0)
        y = _jitter(rng, 80, 460)
        x0 = _jitter(rng, 250, 420)
        # Walk until the box is fully out (left edge past the frame), then a
        # couple of spare frames before despawn.
        travel = (FRAME_W + 30.0) - (x0 - 12.0)
        steps = int(travel / speed) + 2
        despawn = min(spawn + steps, frames)
        agents.append(
            AgentSpec(
                spawn=spawn,
                despawn=despawn,
                width=24.0,
                height=48.0,
                waypoints=((spawn, x0, y), (despawn, x0 + speed * (despawn - spawn), y)),
            )
        )
    # Two residents that never leave, keeping tracked work in every frame.
    for k in range(2):
        y = 120.0 + 260.0 * k
        agents.append(
            AgentSpec(
                spawn=1,
                despawn=frames,
                width=24.0,
                height=48.0,
                waypoints=(
                    (1, 80.0 + 40 * k, y),
                    (frames // 2, 200.0 + 40 * k, y + _jitter(rng, -30, 30)),
                    (frames, 80.0 + 40 * k, y),
                ),
            )
        )
    return SceneConfig(
        frame_width=FRAME_W,
        frame_height=FRAME_H,
        frames=frames,
        seed=seed,
        sigma_area=0.1,
        sigma_ratio=0.06,
        min_visibility=0.3,
        miss_prob=0.0,
        conf_base=0.92,
        conf_penalty=0.7,
        agents=agents,
        occluders=[],
    )


def rollback_scene(seed: int) -> SceneConfig:
    """One constant-velocity target behind a slab: noisy semi frames, long gap."""
    rng = Xoshiro256StarStar(seed * 31337 + 3)
    frames = 60
    speed = 6.0
    width, height = 26.0, 52.0
    y = _jitter(rng, 200, 340)
    # Slab sized for ~10 fully hidden frames at this speed.
    slab_w = width + 10.0 * speed
    slab_left = 430.0
    occluder = BoundingBox(slab_left, y - 120.0, slab_w, 240.0)
    x0 = slab_left - speed * 25  # 25 clean frames before first contact
    agents = [
        AgentSpec(
            spawn=1,
            despawn=frames,
            width=width,
            height=height,
            waypoints=((1, x0, y), (frames, x0 + speed * (frames - 1), y)),
        )
    ]
    return SceneConfig(
        frame_width=FRAME_W,
        frame_height=FRAME_H,
        frames=frames,
        seed=seed,
        sigma_area=1.2,
        sigma_ratio=0.7,
        min_visibility=0.25,
        miss_prob=0.0,
        conf_base=0.95,
        conf_penalty=0.5,
        agents=agents,
        occluders=[occluder],
    )


def crossing_scene(seed: int = 1) -> SceneConfig:
    """Two targets crossing paths; the smaller one disappears behind the other.

    The front walker is wide enough, and the closing speed slow enough, for a
    roughly five-frame full dropout of the rear walker at the crossing point.
    """
    rng = Xoshiro256StarStar(seed * 271 + 5)
    frames = 80
    y = 270.0 + _jitter(rng, -40, 40)
    speed = 3.2
    span = speed * (frames - 1)
    mid = FRAME_W / 2
    a = AgentSpec(
        spawn=1,
        despawn=frames,
        width=26.0,
        height=52.0,
        waypoints=((1, mid - span / 2, y), (frames, mid + span / 2, y)),
    )
    b = AgentSpec(
        spawn=1,
        despawn=frames,
        width=44.0,
        height=80.0,
        waypoints=((1, mid + span / 2, y), (frames, mid - span / 2, y)),
    )
    return SceneConfig(
        frame_width=FRAME_W,
        frame_height=FRAME_H,
        frames=frames,
        seed=seed,
        sigma_area=0.05,
        sigma_ratio=0.05,
        min_visibility=0.3,
        miss_prob=0.0,
        conf_base=0.92,
        conf_penalty=0.6,
        agents=[a, b],
        occluders=[],
    )


def throughput_scene(seed: int = 9, frames: int = 1000, n_agents: int = 30) -> SceneConfig:
    """Dense steady traffic for the benchmark: bouncing diagonal walkers."""
    rng = Xoshiro256StarStar(seed)
    agents = []
    for k in range(n_agents):
        x0 = _jitter(rng, 60, FRAME_W - 60)
        y0 = _jitter(rng, 60, FRAME_H - 60)
        # Ricochet path via dense waypoints every 100 frames.
        waypoints = [(1, x0, y0)]
        x, y = x0, y0
        vx = _jitter(rng, -4, 4)
        vy = _jitter(rng, -3, 3)
        t = 1
        while t < frames:
            t2 = min(t + 100, frames)
            x2 = x + vx * (t2 - t)
            y2 = y + vy * (t2 - t)
            if not 40 <= x2 <= FRAME_W - 40:
                vx = -vx
                x2 = x + vx * (t2 - t)
            if not 40 <= y2 <= FRAME_H - 40:
                vy = -vy
                y2 = y + vy * (t2 - t)
            waypoints.append((t2, x2, y2))
            x, y, t = x2, y2, t2
        agents.append(
            AgentSpec(
                spawn=1,
                despawn=frames,
                width=20.0,
                height=40.0,
                waypoints=tuple(waypoints),
            )
        )
    return SceneConfig(
        frame_width=FRAME_W,
        frame_height=FRAME_H,
        frames=frames,
        seed=seed,
        sigma_area=0.05,
        sigma_ratio=0.05,
        min_visibility=0.3,
        miss_prob=0.01,
        conf_base=0.9,
        conf_penalty=0.5,
        agents=agents,
        occluders=[],
    )
