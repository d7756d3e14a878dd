"""Association of a radar track ID with the GPS-tracked ownship.

Radar trackers drop tracks (re-acquiring under a new ID), swap IDs between
objects that pass close to each other, and spawn duplicate tracks.  The
correlator counts, per track, how many radar samples fall within a distance
threshold of the time-interpolated GPS position over the most recent window
and over two older windows, and only moves an existing association when two
of the three window winners agree.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .geo import FrameError, GeodeticPoint


class TimedTrack:
    """Time-ordered ENU positions in a growable buffer."""

    def __init__(self, origin: Optional[GeodeticPoint] = None, capacity: int = 64):
        self.origin = origin
        self._t = np.empty(capacity)
        self._p = np.empty((capacity, 3))
        self._n = 0

    @classmethod
    def from_arrays(cls, times, positions, origin: Optional[GeodeticPoint] = None, **kwargs):
        tr = cls(origin=origin, capacity=max(len(times), 1), **kwargs)
        for t, p in zip(times, positions):
            tr.append(t, p)
        return tr

    def append(self, t: float, position: Sequence[float]) -> None:
        if self._n and t <= self._t[self._n - 1]:
            raise ValueError(f"timestamp {t} does not advance past {self._t[self._n - 1]}")
        if self._n == len(self._t):
            self._t = np.concatenate([self._t, np.empty(len(self._t))])
            self._p = np.concatenate([self._p, np.empty((len(self._p), 3))])
        self._t[self._n] = t
        self._p[self._n] = position
        self._n += 1

    @property
    def times(self) -> np.ndarray:
        return self._t[: self._n]

    @property
    def positions(self) -> np.ndarray:
        return self._p[: self._n]

    def __len__(self) -> int:
        return self._n

    @property
    def first_time(self) -> float:
        return float(self._t[0])

    @property
    def last_time(self) -> float:
        return float(self._t[self._n - 1])

    def window(self, t_lo: float, t_hi: float) -> Tuple[np.ndarray, np.ndarray]:
        """Samples with t_lo < t <= t_hi."""
        t = self.times
        i0 = np.searchsorted(t, t_lo, side="right")
        i1 = np.searchsorted(t, t_hi, side="right")
        return t[i0:i1], self._p[i0:i1]


class RadarTrack(TimedTrack):
    def __init__(self, track_id: int, origin: Optional[GeodeticPoint] = None, capacity: int = 64,
                 active: bool = True):
        super().__init__(origin=origin, capacity=capacity)
        self.track_id = int(track_id)
        self.active = active

    @classmethod
    def from_arrays(cls, track_id, times, positions, origin=None, active=True):
        tr = cls(track_id, origin=origin, capacity=max(len(times), 1), active=active)
        for t, p in zip(times, positions):
            tr.append(t, p)
        return tr

    def __repr__(self):
        span = f"{self.first_time:.2f}-{self.last_time:.2f}s" if len(self) else "empty"
        return f"RadarTrack(id={self.track_id}, n={len(self)}, {span})"


class GpsTrack(TimedTrack):
    pass


def interpolate_gps(g: GpsTrack, timestamps) -> np.ndarray:
    """Piecewise-linear GPS positions at ``timestamps``.

    Rows for timestamps outside the GPS span are NaN; callers treat them as
    not-a-detection rather than as an error.
    """
    ts = np.asarray(timestamps, dtype=float)
    out = np.full((len(ts), 3), np.nan)
    if len(g) == 0 or len(ts) == 0:
        return out
    t = g.times
    inside = (ts >= t[0]) & (ts <= t[-1])
    if inside.any():
        p = g.positions
        for k in range(3):
            out[inside, k] = np.interp(ts[inside], t, p[:, k])
    return out


def _check_frames(r: TimedTrack, g: TimedTrack) -> None:
    if r.origin is not None and g.origin is not None and r.origin != g.origin:
        raise FrameError("radar and GPS tracks are expressed in different ENU frames")


def count_detections(r: RadarTrack, g: GpsTrack, window: Tuple[float, float], epsilon: float) -> int:
    """Radar samples in ``(t_lo, t_hi]`` strictly closer than ``epsilon`` to interpolated GPS."""
    t_lo, t_hi = window
    if not t_lo < t_hi:
        raise ValueError("window must satisfy t_lo < t_hi")
    _check_frames(r, g)
    t, p = r.window(t_lo, t_hi)
    if len(t) == 0:
        return 0
    gi = interpolate_gps(g, t)
    d = np.linalg.norm(p - gi, axis=1)
    return int(np.count_nonzero(d < epsilon))  # NaN compares False


@dataclass(frozen=True)
class CorrelatorState:
    associated_id: Optional[int] = None
    epsilon: float = 10.0
    window_length: float = 2.0
    window_count: int = 3
    stale_after: float = 2.0

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.window_length <= 0:
            raise ValueError("window_length must be positive")
        if self.window_count < 1:
            raise ValueError("window_count must be >= 1")


def active_tracks(tracks: Iterable[RadarTrack], now: float, stale_after: float) -> List[RadarTrack]:
    return [tr for tr in tracks
            if tr.active and len(tr) and tr.last_time > now - stale_after and tr.first_time <= now]


def window_winner(counts: Dict[int, int]) -> Optional[int]:
    """Track with the most detections; lowest ID on ties; None when nobody scored."""
    best = None
    for tid in sorted(counts):
        if counts[tid] > 0 and (best is None or counts[tid] > counts[best]):
            best = tid
    return best


def window_counts(tracks: Sequence[RadarTrack], g: GpsTrack, now: float, state: CorrelatorState,
                  j: int) -> Dict[int, int]:
    hi = now - j * state.window_length
    lo = hi - state.window_length
    return {tr.track_id: count_detections(tr, g, (lo, hi), state.epsilon) for tr in tracks}


def update_association(state: CorrelatorState, tracks: Sequence[RadarTrack], g: GpsTrack,
                       now: float) -> CorrelatorState:
    live = active_tracks(tracks, now, state.stale_after)
    m0 = window_winner(window_counts(live, g, now, state, 0))
    if state.associated_id is None:
        return replace(state, associated_id=m0) if m0 is not None else state
    if m0 == state.associated_id:
        return state
    winners = [m0] + [window_winner(window_counts(live, g, now, state, j))
                      for j in range(1, state.window_count)]
    tally = Counter(w for w in winners if w is not None)
    if not tally:
        return state
    # ordered by first appearance, so a tie at the top favours the newer window
    winner, votes = tally.most_common(1)[0]
    if votes < 2:
        return state
    return replace(state, associated_id=winner)


class TrackCorrelator:
    """Stateful wrapper that also records the association history."""

    def __init__(self, state: Optional[CorrelatorState] = None):
        self.state = state or CorrelatorState()
        self.history: List[Tuple[float, Optional[int]]] = []

    @property
    def associated_id(self) -> Optional[int]:
        return self.state.associated_id

    def update(self, tracks: Sequence[RadarTrack], gps: GpsTrack, now: float) -> Optional[int]:
        before = self.state.associated_id
        self.state = update_association(self.state, tracks, gps, now)
        if self.state.associated_id != before or not self.history:
            self.history.append((now, self.state.associated_id))
        return self.state.associated_id

    def unassociated(self, tracks: Iterable[RadarTrack], now: float) -> List[RadarTrack]:
        """Active tracks other than the ownship's."""
        return [tr for tr in active_tracks(tracks, now, self.state.stale_after)
                if tr.track_id != self.state.associated_id]
