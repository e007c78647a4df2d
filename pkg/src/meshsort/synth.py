"""Deterministic synthetic scenes: ground truth plus detector-like noisy output.

Agents follow piecewise-linear center paths with fixed box sizes. Static
rectangles and nearer agents occlude them; partially covered agents get
multiplicative area/aspect noise and reduced confidence, fully covered or
randomly missed agents emit nothing. All randomness comes from a hand-rolled
xoshiro256** generator with Box-Muller normals so byte-identical output for a
given (config, seed) holds across platforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import BoundingBox
from .pipeline import Detection, FrameDetections

_MASK64 = (1 << 64) - 1


def _splitmix64(state: int):
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Xoshiro256StarStar:
    """64-bit xoshiro256** stream seeded through splitmix64."""

    def __init__(self, seed: int):
        s = seed & _MASK64
        self.state = []
        for _ in range(4):
            s, word = _splitmix64(s)
            self.state.append(word)
        self._spare_normal: float | None = None

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.state
        result = (_rotl((s1 * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self.state = [s0, s1, s2, s3]
        return result

    def uniform(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def normal(self) -> float:
        """Standard normal via the Box-Muller transform (pairs cached)."""
        if self._spare_normal is not None:
            z = self._spare_normal
            self._spare_normal = None
            return z
        u1 = 1.0 - self.uniform()
        u2 = self.uniform()
        radius = math.sqrt(-2.0 * math.log(u1))
        self._spare_normal = radius * math.sin(2.0 * math.pi * u2)
        return radius * math.cos(2.0 * math.pi * u2)


@dataclass(frozen=True)
class AgentSpec:
    """One moving target: spawn/despawn frames, box size, center waypoints."""

    spawn: int
    despawn: int
    width: float
    height: float
    waypoints: tuple[tuple[int, float, float], ...]

    def validate(self) -> None:
        if self.spawn < 1 or self.despawn < self.spawn:
            raise ValueError(f"bad spawn/despawn pair ({self.spawn}, {self.despawn})")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("agent box size must be positive")
        if not self.waypoints:
            raise ValueError("agent needs at least one waypoint")
        times = [t for t, _, _ in self.waypoints]
        if times != sorted(times) or len(set(times)) != len(times):
            raise ValueError("waypoint times must be strictly increasing")
        if times[0] < self.spawn or times[-1] > self.despawn:
            raise ValueError("waypoint times must lie within [spawn, despawn]")

    def center_at(self, frame: int) -> tuple[float, float]:
        pts = self.waypoints
        if frame <= pts[0][0]:
            return pts[0][1], pts[0][2]
        if frame >= pts[-1][0]:
            return pts[-1][1], pts[-1][2]
        for (t0, x0, y0), (t1, x1, y1) in zip(pts, pts[1:]):
            if t0 <= frame <= t1:
                w = (frame - t0) / (t1 - t0)
                return x0 + w * (x1 - x0), y0 + w * (y1 - y0)
        raise AssertionError("unreachable")

    def box_at(self, frame: int) -> BoundingBox:
        cx, cy = self.center_at(frame)
        return BoundingBox(cx - self.width / 2, cy - self.height / 2, self.width, self.height)

    def max_speed(self) -> float:
        speed = 0.0
        for (t0, x0, y0), (t1, x1, y1) in zip(self.waypoints, self.waypoints[1:]):
            speed = max(speed, math.hypot(x1 - x0, y1 - y0) / (t1 - t0))
        return speed


@dataclass
class SceneConfig:
    frame_width: float = 960.0
    frame_height: float = 540.0
    frames: int = 100
    seed: int = 1
    sigma_area: float = 0.15
    sigma_ratio: float = 0.1
    min_visibility: float = 0.3
    miss_prob: float = 0.0
    conf_base: float = 0.9
    conf_penalty: float = 0.5
    agents: list[AgentSpec] = field(default_factory=list)
    occluders: list[BoundingBox] = field(default_factory=list)

    def validate(self) -> None:
        if self.frames < 1 or self.frame_width <= 0 or self.frame_height <= 0:
            raise ValueError("scene needs positive frame count and size")
        if self.sigma_area < 0 or self.sigma_ratio < 0:
            raise ValueError("noise sigmas must be non-negative")
        if not 0.0 <= self.miss_prob <= 1.0:
            raise ValueError("miss_prob must lie in [0, 1]")
        for agent in self.agents:
            agent.validate()
            if agent.despawn > self.frames:
                raise ValueError("agent outlives the scene")


def covered_fraction(box: BoundingBox, covers: list[BoundingBox],
                     frame_size: tuple[float, float]) -> float:
    """Fraction of the box hidden: covered by rectangles or outside the frame.

    Exact area computation over the union of covers via coordinate
    compression (cover counts per scene are small).
    """
    fw, fh = frame_size
    # Out-of-frame area counts as hidden.
    in_left = max(box.left, 0.0)
    in_top = max(box.top, 0.0)
    in_right = min(box.right, fw)
    in_bottom = min(box.bottom, fh)
    if in_right <= in_left or in_bottom <= in_top:
        return 1.0
    clipped = []
    for c in covers:
        left = max(c.left, in_left)
        top = max(c.top, in_top)
        right = min(c.right, in_right)
        bottom = min(c.bottom, in_bottom)
        if right > left and bottom > top:
            clipped.append((left, top, right, bottom))
    covered = 0.0
    if clipped:
        xs = sorted({v for r in clipped for v in (r[0], r[2])})
        ys = sorted({v for r in clipped for v in (r[1], r[3])})
        for x0, x1 in zip(xs, xs[1:]):
            for y0, y1 in zip(ys, ys[1:]):
                mx = (x0 + x1) / 2
                my = (y0 + y1) / 2
                if any(r[0] <= mx <= r[2] and r[1] <= my <= r[3] for r in clipped):
                    covered += (x1 - x0) * (y1 - y0)
    inside = (in_right - in_left) * (in_bottom - in_top)
    hidden = (box.area - inside) + covered
    return min(max(hidden / box.area, 0.0), 1.0)


def semi_occlusion_noise(
    z: np.ndarray,
    visibility: float,
    sigma_area: float,
    sigma_ratio: float,
    rng: Xoshiro256StarStar,
) -> np.ndarray:
    """Perturb the area/aspect slots of a measurement under partial cover.

    Fully visible measurements pass through unchanged; position slots are
    never touched. The multiplicative disturbance scales with how much of the
    box is hidden.
    """
    if not 0.0 <= visibility <= 1.0:
        raise ValueError("visibility must lie in [0, 1]")
    out = np.asarray(z, dtype=np.float64).copy()
    if visibility >= 1.0:
        return out
    hidden = 1.0 - visibility
    eps_area = rng.normal() * sigma_area
    eps_ratio = rng.normal() * sigma_ratio
    out[2] = out[2] * max(1.0 + eps_area * hidden, 1e-3)
    out[3] = out[3] * max(1.0 + eps_ratio * hidden, 1e-3)
    return out


def visibility_of(cfg: SceneConfig, agent_idx: int, frame: int) -> float:
    """Visible fraction of one agent's box; later-listed agents sit in front."""
    agent = cfg.agents[agent_idx]
    box = agent.box_at(frame)
    covers = list(cfg.occluders)
    for j, other in enumerate(cfg.agents):
        if j <= agent_idx:
            continue
        if other.spawn <= frame <= other.despawn:
            covers.append(other.box_at(frame))
    return 1.0 - covered_fraction(box, covers, (cfg.frame_width, cfg.frame_height))


def generate(cfg: SceneConfig):
    """Build (ground-truth trajectories, detection frames) for a scene.

    Ground truth carries the exact interpolated boxes for every agent's
    lifespan. Detections exist only for sufficiently visible agents, carry
    visibility-scaled noise on the size slots, exact centers, and a
    visibility-dependent confidence.
    """
    cfg.validate()
    rng = Xoshiro256StarStar(cfg.seed)
    gt: dict[int, dict[int, BoundingBox]] = {}
    for idx, agent in enumerate(cfg.agents):
        tid = idx + 1
        gt[tid] = {
            frame: agent.box_at(frame)
            for frame in range(agent.spawn, agent.despawn + 1)
        }
    det_frames: list[FrameDetections] = []
    for frame in range(1, cfg.frames + 1):
        dets: list[Detection] = []
        for idx, agent in enumerate(cfg.agents):
            if not agent.spawn <= frame <= agent.despawn:
                continue
            vis = visibility_of(cfg, idx, frame)
            if vis < cfg.min_visibility or vis <= 0.0:
                continue
            if cfg.miss_prob > 0.0 and rng.uniform() < cfg.miss_prob:
                continue
            box = agent.box_at(frame)
            if vis < 1.0:
                z = np.array(
                    [
                        box.left + box.width / 2,
                        box.top + box.height / 2,
                        box.area,
                        box.width / box.height,
                    ]
                )
                z = semi_occlusion_noise(z, vis, cfg.sigma_area, cfg.sigma_ratio, rng)
                w = math.sqrt(z[2] * z[3])
                h = math.sqrt(z[2] / z[3])
                box = BoundingBox(z[0] - w / 2, z[1] - h / 2, w, h)
            conf = min(max(cfg.conf_base - cfg.conf_penalty * (1.0 - vis), 0.05), 1.0)
            dets.append(Detection(box, conf))
        det_frames.append(FrameDetections(index=frame, detections=tuple(dets)))
    return gt, det_frames


def parse_scene(text: str) -> SceneConfig:
    """Parse the plain-text scene grammar.

    Scalar lines are ``key = value``. Agents and occluders repeat::

        agent = spawn:1 despawn:90 size:24x48 path:100,300@1 800,300@90
        occluder = 450,260,40,120

    Agent paths list ``x,y@frame`` center waypoints; occluders are
    ``left,top,width,height`` rectangles.
    """
    cfg = SceneConfig()
    scalars = {
        "frame_width": float,
        "frame_height": float,
        "frames": int,
        "seed": int,
        "sigma_area": float,
        "sigma_ratio": float,
        "min_visibility": float,
        "miss_prob": float,
        "conf_base": float,
        "conf_penalty": float,
    }
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"scene line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            if key == "agent":
                cfg.agents.append(_parse_agent(value))
            elif key == "occluder":
                left, top, w, h = (float(v) for v in value.split(","))
                cfg.occluders.append(BoundingBox(left, top, w, h))
            elif key in scalars:
                setattr(cfg, key, scalars[key](value))
            else:
                raise ValueError(f"unknown scene key {key!r}")
        except ValueError as exc:
            raise ValueError(f"scene line {lineno}: {exc}") from exc
    cfg.validate()
    return cfg


def _parse_agent(value: str) -> AgentSpec:
    fields = {}
    path: list[tuple[int, float, float]] = []
    tokens = value.split()
    i = 0
    while i < len(tokens):
        token = tokens[i]
        if token.startswith("path:"):
            path_tokens = [token[len("path:"):]] + tokens[i + 1:]
            for pt in path_tokens:
                xy, at = pt.split("@")
                x, y = (float(v) for v in xy.split(","))
                path.append((int(at), x, y))
            break
        key, val = token.split(":", 1)
        fields[key] = val
        i += 1
    if "size" not in fields or "spawn" not in fields or "despawn" not in fields:
        raise ValueError("agent needs spawn:, despawn:, size:, and path:")
    w, h = (float(v) for v in fields["size"].split("x"))
    return AgentSpec(
        spawn=int(fields["spawn"]),
        despawn=int(fields["despawn"]),
        width=w,
        height=h,
        waypoints=tuple(path),
    )


def format_scene(cfg: SceneConfig) -> str:
    """Inverse of :func:`parse_scene`, used to write suite scenes to disk."""
    lines = [
        f"frame_width = {cfg.frame_width}",
        f"frame_height = {cfg.frame_height}",
        f"frames = {cfg.frames}",
        f"seed = {cfg.seed}",
        f"sigma_area = {cfg.sigma_area}",
        f"sigma_ratio = {cfg.sigma_ratio}",
        f"min_visibility = {cfg.min_visibility}",
        f"miss_prob = {cfg.miss_prob}",
        f"conf_base = {cfg.conf_base}",
        f"conf_penalty = {cfg.conf_penalty}",
    ]
    for occ in cfg.occluders:
        lines.append(f"occluder = {occ.left},{occ.top},{occ.width},{occ.height}")
    for agent in cfg.agents:
        path = " ".join(f"{x},{y}@{t}" for t, x, y in agent.waypoints)
        lines.append(
            "agent = "
            f"spawn:{agent.spawn} despawn:{agent.despawn} "
            f"size:{agent.width}x{agent.height} path:{path}"
        )
    return "\n".join(lines) + "\n"
