"""Constant-velocity Kalman filter over [cx, cy, area, aspect] box states.

The state is the 4-vector measurement plus its per-frame rates, giving an
8-dimensional mean and covariance. Noise magnitudes follow the usual
height-proportional convention: position slots scale with box height,
the area slot with height squared, and the dimensionless aspect slot gets
small fixed standard deviations.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

STATE_DIM = 8
MEAS_DIM = 4

_ASPECT_STD_PROCESS = 1e-2
_ASPECT_STD_MEASURE = 1e-1
_ASPECT_STD_VELOCITY = 1e-5
_MIN_HEIGHT = 1e-3


class NumericsError(RuntimeError):
    """Raised when a filter update hits a degenerate (singular) innovation."""


@dataclass(frozen=True)
class KalmanState:
    """Gaussian belief over one track's box state."""

    mean: np.ndarray
    covariance: np.ndarray

    def velocity(self) -> np.ndarray:
        return self.mean[MEAS_DIM:].copy()

    def projected(self) -> np.ndarray:
        """Measurement-space view of the mean (first four components)."""
        return self.mean[:MEAS_DIM].copy()


def _measurement_height(z4: np.ndarray) -> float:
    area = max(float(z4[2]), _MIN_HEIGHT)
    aspect = max(float(z4[3]), _MIN_HEIGHT)
    return max(np.sqrt(area / aspect), _MIN_HEIGHT)


class MotionModel:
    """Transition/observation matrices plus height-scaled noise generators.

    ``pos_weight`` and ``vel_weight`` set the per-frame standard deviation of
    position/size and velocity noise as fractions of the box height.
    """

    def __init__(self, pos_weight: float = 1.0 / 20.0, vel_weight: float = 1.0 / 160.0):
        self.pos_weight = pos_weight
        self.vel_weight = vel_weight
        f = np.eye(STATE_DIM)
        for i in range(MEAS_DIM):
            f[i, MEAS_DIM + i] = 1.0
        self.transition = f
        h = np.zeros((MEAS_DIM, STATE_DIM))
        h[:, :MEAS_DIM] = np.eye(MEAS_DIM)
        self.observation = h

    def process_noise(self, height: float) -> np.ndarray:
        wp, wv = self.pos_weight, self.vel_weight
        std = np.array(
            [
                wp * height,
                wp * height,
                wp * height * height,
                _ASPECT_STD_PROCESS,
                wv * height,
                wv * height,
                wv * height * height,
                _ASPECT_STD_VELOCITY,
            ]
        )
        return np.diag(std * std)

    def measurement_noise(self, height: float) -> np.ndarray:
        wp = self.pos_weight
        std = np.array([wp * height, wp * height, wp * height * height, _ASPECT_STD_MEASURE])
        return np.diag(std * std)

    def initial_covariance(self, z4: np.ndarray) -> np.ndarray:
        height = _measurement_height(z4)
        wp, wv = self.pos_weight, self.vel_weight
        std = np.array(
            [
                2 * wp * height,
                2 * wp * height,
                2 * wp * height * height,
                _ASPECT_STD_PROCESS,
                10 * wv * height,
                10 * wv * height,
                10 * wv * height * height,
                _ASPECT_STD_VELOCITY,
            ]
        )
        return np.diag(std * std)


def _symmetrized(p: np.ndarray) -> np.ndarray:
    return (p + p.T) / 2.0


def initiate(z: np.ndarray, model: MotionModel) -> KalmanState:
    """Bootstrap a belief from a first measurement: zero velocity, diagonal covariance."""
    z = np.asarray(z, dtype=np.float64)
    mean = np.zeros(STATE_DIM)
    mean[:MEAS_DIM] = z
    return KalmanState(mean=mean, covariance=model.initial_covariance(z))


def predict(state: KalmanState, model: MotionModel) -> KalmanState:
    """Advance the belief one frame under the constant-velocity model."""
    f = model.transition
    height = _measurement_height(state.mean[:MEAS_DIM])
    mean = f @ state.mean
    cov = _symmetrized(f @ state.covariance @ f.T + model.process_noise(height))
    return KalmanState(mean=mean, covariance=cov)


def update(
    state: KalmanState,
    z: np.ndarray,
    model: MotionModel,
    noise_scale: float = 1.0,
) -> KalmanState:
    """Fold a measurement into the belief.

    ``noise_scale`` inflates the measurement covariance; soft self-updates
    (virtual proposals of unmatched tracks) pass a value > 1 so the pseudo
    observation carries little weight.

    Raises :class:`NumericsError` when the innovation covariance is singular.
    The measurement noise is evaluated at the prior mean's height, never at
    the measurement itself, so that equal priors always yield equal gains.
    """
    z = np.asarray(z, dtype=np.float64)
    h = model.observation
    height = _measurement_height(state.mean[:MEAS_DIM])
    r = model.measurement_noise(height) * noise_scale
    p = state.covariance
    s = h @ p @ h.T + r
    try:
        chol = scipy.linalg.cho_factor(s, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NumericsError("singular innovation covariance") from exc
    gain = scipy.linalg.cho_solve(chol, (p @ h.T).T, check_finite=False).T
    mean = state.mean + gain @ (z - h @ state.mean)
    cov = _symmetrized((np.eye(STATE_DIM) - gain @ h) @ p)
    return KalmanState(mean=mean, covariance=cov)


def gain_matrix(state: KalmanState, model: MotionModel, noise_scale: float = 1.0) -> np.ndarray:
    """The Kalman gain the next :func:`update` on ``state`` would apply."""
    h = model.observation
    height = _measurement_height(state.mean[:MEAS_DIM])
    r = model.measurement_noise(height) * noise_scale
    p = state.covariance
    s = h @ p @ h.T + r
    return np.linalg.solve(s, (p @ h.T).T).T


@dataclass
class VelocityBuffer:
    """Ring buffer of velocity 4-vectors recorded on real-detection updates."""

    capacity: int = 5
    _entries: deque = field(default_factory=deque, repr=False)

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("velocity buffer capacity must be >= 1")
        self._entries = deque(self._entries, maxlen=self.capacity)

    def __len__(self) -> int:
        return len(self._entries)

    def entries(self) -> list[np.ndarray]:
        return [v.copy() for v in self._entries]

    def record(self, state: KalmanState) -> None:
        """Store the state's current velocity; evicts the oldest entry at capacity."""
        self._entries.append(state.velocity())

    def recall(self, mode: str = "oldest") -> np.ndarray | None:
        if not self._entries:
            return None
        if mode == "oldest":
            return self._entries[0].copy()
        if mode == "mean":
            return np.mean(np.stack(self._entries), axis=0)
        raise ValueError(f"unknown rollback mode {mode!r}")


def rollback_velocity(
    state: KalmanState,
    buffer: VelocityBuffer,
    mode: str = "oldest",
    freeze_size_velocity: bool = False,
) -> tuple[KalmanState, bool]:
    """Replace the mean's velocity components with a buffered (pre-noise) entry.

    Position, size, and covariance are left untouched. Returns the new state
    plus a flag telling whether any history was available; an empty buffer is
    a signalled no-op.
    """
    recalled = buffer.recall(mode)
    if recalled is None:
        return state, False
    mean = state.mean.copy()
    mean[MEAS_DIM:] = recalled
    if freeze_size_velocity:
        mean[6] = 0.0
        mean[7] = 0.0
    return KalmanState(mean=mean, covariance=state.covariance), True
