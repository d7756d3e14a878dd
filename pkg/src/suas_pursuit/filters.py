"""Measurement smoothing: fixed-gain alpha-beta trackers and a sliding median."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .geo import Quaternion


@dataclass(frozen=True)
class AlphaBetaState:
    """Filter state.  ``estimate`` is None until the first measurement arrives."""

    alpha: float = 0.5
    beta: float = 0.1
    estimate: Optional[np.ndarray] = None
    rate: Optional[np.ndarray] = None
    last_timestamp: Optional[float] = None

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")


def alpha_beta_update(state: AlphaBetaState, measurement, timestamp: float) -> AlphaBetaState:
    """One predict-correct cycle.  Scalars and small vectors are both accepted."""
    z = np.asarray(measurement, dtype=float)
    if state.estimate is None:
        rate = np.zeros_like(z) if state.rate is None else np.asarray(state.rate, dtype=float)
        return replace(state, estimate=z.copy(), rate=rate, last_timestamp=float(timestamp))
    if timestamp <= state.last_timestamp:
        raise ValueError(f"timestamp {timestamp} does not advance past {state.last_timestamp}")
    dt = timestamp - state.last_timestamp
    predicted = state.estimate + state.rate * dt
    residual = z - predicted
    return replace(
        state,
        # blended form so that alpha=1 reproduces the measurement exactly
        estimate=(1.0 - state.alpha) * predicted + state.alpha * z,
        rate=state.rate + state.beta * residual / dt,
        last_timestamp=float(timestamp),
    )


class AlphaBetaTracker:
    """Mutable convenience wrapper around :func:`alpha_beta_update`."""

    def __init__(self, alpha: float = 0.5, beta: float = 0.1):
        self.state = AlphaBetaState(alpha=alpha, beta=beta)

    def update(self, measurement, timestamp: float) -> np.ndarray:
        self.state = alpha_beta_update(self.state, measurement, timestamp)
        return self.state.estimate

    def reset(self) -> None:
        self.state = AlphaBetaState(alpha=self.state.alpha, beta=self.state.beta)


class QuaternionAlphaBeta:
    """Alpha-beta smoothing of an orientation.

    The filter keeps an orientation and an angular-rate vector (world frame,
    rad/s).  Each update predicts forward by the rate, takes the rotation-vector
    residual between measurement and prediction, and corrects both states by
    the usual gains.  The output stays unit-norm by construction.
    """

    def __init__(self, alpha: float = 0.5, beta: float = 0.1):
        if not (0.0 <= alpha <= 1.0 and 0.0 <= beta <= 1.0):
            raise ValueError("alpha and beta must lie in [0, 1]")
        self.alpha = alpha
        self.beta = beta
        self.orientation: Optional[Quaternion] = None
        self.rate = np.zeros(3)
        self.last_timestamp: Optional[float] = None

    def update(self, q: Quaternion, timestamp: float) -> Quaternion:
        q = q.normalized()
        if self.orientation is None:
            self.orientation, self.last_timestamp = q, float(timestamp)
            return q
        if timestamp <= self.last_timestamp:
            raise ValueError(f"timestamp {timestamp} does not advance past {self.last_timestamp}")
        dt = timestamp - self.last_timestamp
        predicted = (Quaternion.from_rotation_vector(self.rate * dt) * self.orientation).normalized()
        residual = (q * predicted.conjugate()).as_rotation_vector()
        self.orientation = (Quaternion.from_rotation_vector(self.alpha * residual) * predicted).normalized()
        self.rate = self.rate + self.beta * residual / dt
        self.last_timestamp = float(timestamp)
        return self.orientation


class MedianWindow:
    """Median over the most recent ``window_size`` samples.

    A partially filled window uses whatever samples it has; even counts
    average the two central values.
    """

    def __init__(self, window_size: int = 5):
        if window_size < 1:
            raise ValueError("window_size must be >= 1")
        self.window_size = window_size
        self.buffer: deque = deque(maxlen=window_size)

    def push(self, sample: float) -> float:
        self.buffer.append(float(sample))
        return float(np.median(self.buffer))

    def clear(self) -> None:
        self.buffer.clear()

    def __len__(self) -> int:
        return len(self.buffer)
