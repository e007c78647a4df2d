"""Uniform frame-space grid that tallies where tracks get lost and found back.

Each cell keeps a signed count: +1 per loss, -1 per refind. Cells whose count
stays above a (time-growing) threshold are flagged as frequent-loss regions,
which the lifecycle logic treats as likely exits or fixed obstacles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Point2

CellId = tuple[int, int]


@dataclass(frozen=True)
class LossThreshold:
    """Linear time-variant threshold: ``slope * t`` for normal cells, 0 for frequent ones.

    Keeping the threshold at zero for already-frequent cells makes a cell stay
    frequent while its count remains positive, instead of flapping against the
    growing line.
    """

    slope: float = 0.02

    def value(self, state: int, t: int) -> float:
        if t <= 0:
            raise ValueError("threshold is defined for positive frame times only")
        return 0.0 if state else self.slope * t


@dataclass
class MeshSnapshot:
    """Immutable copy of grid counts for export or inspection."""

    cols: int
    rows: int
    frame: int
    counts: np.ndarray
    frequent: frozenset[CellId]

    def to_text(self) -> str:
        lines = [f"mesh {self.cols} {self.rows} frame {self.frame}"]
        for j in range(self.rows):
            lines.append(" ".join(str(int(self.counts[i, j])) for i in range(self.cols)))
        cells = " ".join(f"({i},{j})" for i, j in sorted(self.frequent))
        lines.append(f"frequent: {cells}".rstrip())
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "MeshSnapshot":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        head = lines[0].split()
        if len(head) != 5 or head[0] != "mesh" or head[3] != "frame":
            raise ValueError(f"bad snapshot header: {lines[0]!r}")
        cols, rows, frame = int(head[1]), int(head[2]), int(head[4])
        counts = np.zeros((cols, rows), dtype=np.int64)
        for j in range(rows):
            row = lines[1 + j].split()
            if len(row) != cols:
                raise ValueError(f"snapshot row {j} has {len(row)} entries, expected {cols}")
            for i, v in enumerate(row):
                counts[i, j] = int(v)
        tail = lines[1 + rows]
        if not tail.startswith("frequent:"):
            raise ValueError(f"bad snapshot trailer: {tail!r}")
        frequent = set()
        for token in tail[len("frequent:"):].split():
            i, j = token.strip("()").split(",")
            frequent.add((int(i), int(j)))
        return cls(cols=cols, rows=rows, frame=frame, counts=counts, frequent=frozenset(frequent))


@dataclass
class MeshGrid:
    """m x n equal subdivision of the frame with per-cell loss bookkeeping.

    Mutated only by the single frame-processing thread of one tracker;
    :meth:`snapshot` hands out independent copies.
    """

    cols: int
    rows: int
    frame_size: tuple[float, float]
    log_events: bool = False
    counts: np.ndarray = field(init=False)
    state: np.ndarray = field(init=False)
    events: list[tuple[str, CellId]] = field(init=False, default_factory=list)

    def __post_init__(self):
        if self.cols < 1 or self.rows < 1:
            raise ValueError("grid needs at least one cell in each direction")
        if self.frame_size[0] <= 0 or self.frame_size[1] <= 0:
            raise ValueError("frame size must be positive")
        self.counts = np.zeros((self.cols, self.rows), dtype=np.int64)
        self.state = np.zeros((self.cols, self.rows), dtype=bool)

    def cell_of(self, p: Point2) -> CellId:
        """Cell index of a point; out-of-frame points clamp to the border cells."""
        w, h = self.frame_size
        i = int(np.floor(p.x * self.cols / w))
        j = int(np.floor(p.y * self.rows / h))
        return (min(max(i, 0), self.cols - 1), min(max(j, 0), self.rows - 1))

    def record_lost(self, p: Point2) -> CellId:
        cell = self.cell_of(p)
        self.counts[cell] += 1
        if self.log_events:
            self.events.append(("lost", cell))
        return cell

    def record_refound(self, p: Point2) -> CellId:
        cell = self.cell_of(p)
        self.counts[cell] -= 1
        if self.log_events:
            self.events.append(("refound", cell))
        return cell

    @property
    def frequent(self) -> frozenset[CellId]:
        i, j = np.nonzero(self.state)
        return frozenset(zip(i.tolist(), j.tolist()))

    def identify(self, threshold: LossThreshold, t: int) -> frozenset[CellId]:
        """Recompute frequent-cell membership from counts and the threshold at time t.

        Each cell's threshold is evaluated against its state from the previous
        pass, then the state matrix is replaced with the new membership.
        """
        limits = np.where(self.state, 0.0, threshold.value(0, t))
        self.state = self.counts > limits
        return self.frequent

    def snapshot(self, frame: int = 0) -> MeshSnapshot:
        return MeshSnapshot(
            cols=self.cols,
            rows=self.rows,
            frame=frame,
            counts=self.counts.copy(),
            frequent=self.frequent,
        )
