"""Synthetic ground radar with track drop, swap and duplicate failure modes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..calibration import RadarPose, RawRadarTrack, cartesian_to_rae, rae_to_cartesian
from ..geo import GeodeticPoint, geodetic_to_enu


def per_step_probability(p_per_s: float, dt: float) -> float:
    """Chance of at least one event in ``dt`` for an event probability ``p_per_s`` per second."""
    if p_per_s >= 1.0:
        return 1.0 if dt > 0 else 0.0
    return 1.0 - (1.0 - p_per_s) ** dt


@dataclass(frozen=True)
class RadarSample:
    t: float
    track_id: int
    rae: Tuple[float, float, float]
    enu: Tuple[float, float, float]
    owner: str  # ground-truth object name
    duplicate: bool = False


@dataclass
class _Duplicate:
    track_id: int
    owner: int
    until: float
    bias: np.ndarray


@dataclass
class SyntheticRadar:
    """Detections in the radar frame, reported in ENU through ``assumed_pose``.

    ``pose`` is the true mounting; a different ``assumed_pose`` models a
    miscalibrated radar.  Failure probabilities are per second (drop,
    duplicate) or per proximity encounter (swap).
    """

    pose: RadarPose
    origin: GeodeticPoint
    fov_az: float = 120.0
    fov_el: float = 80.0
    max_range: float = 750.0
    min_range: float = 5.0
    min_altitude: float = 2.0
    rate_hz: float = 5.0
    noise_sd: Tuple[float, float, float] = (1.0, 0.3, 0.3)
    drop_prob_per_s: float = 0.0
    swap_prob_on_proximity: float = 0.0
    proximity_m: float = 15.0
    duplicate_prob_per_s: float = 0.0
    duplicate_lifetime: Tuple[float, float] = (2.0, 8.0)
    coast_s: float = 1.0
    rng_seed: int = 0
    assumed_pose: Optional[RadarPose] = None
    enabled: bool = True

    def __post_init__(self):
        for name in ("drop_prob_per_s", "swap_prob_on_proximity", "duplicate_prob_per_s"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.rate_hz <= 0:
            raise ValueError("rate_hz must be positive")
        if self.assumed_pose is None:
            self.assumed_pose = self.pose
        self.rng = np.random.default_rng(self.rng_seed)
        self._next_id = 1
        self._primary: Dict[int, int] = {}
        self._last_seen: Dict[int, float] = {}
        self._near: set = set()
        self._dups: List[_Duplicate] = []
        self._last_t: Optional[float] = None
        self.events: List[Tuple[float, str, dict]] = []
        self._true_pos = geodetic_to_enu(self.pose.position, self.origin).vector
        self._true_rot = self.pose.orientation.as_matrix()
        self._rep_pos = geodetic_to_enu(self.assumed_pose.position, self.origin).vector
        self._rep_rot = self.assumed_pose.orientation.as_matrix()

    @property
    def period(self) -> float:
        return 1.0 / self.rate_hz

    def _new_id(self) -> int:
        tid = self._next_id
        self._next_id += 1
        return tid

    def to_radar_frame(self, enu_points) -> np.ndarray:
        return (np.atleast_2d(enu_points) - self._true_pos) @ self._true_rot

    def visible(self, enu_points) -> np.ndarray:
        enu_points = np.atleast_2d(enu_points)
        rae = cartesian_to_rae(self.to_radar_frame(enu_points))
        return ((rae[:, 0] >= self.min_range) & (rae[:, 0] <= self.max_range)
                & (np.abs(rae[:, 1]) <= self.fov_az / 2) & (np.abs(rae[:, 2]) <= self.fov_el / 2)
                & (enu_points[:, 2] >= self.min_altitude))

    def _report(self, rae: np.ndarray) -> np.ndarray:
        return rae_to_cartesian(rae) @ self._rep_rot.T + self._rep_pos

    def step(self, true_positions: Sequence, t: float, names: Optional[Sequence[str]] = None) -> List[RadarSample]:
        """One radar scan at time ``t``: samples for every visible object and live duplicate."""
        pts = np.array([np.asarray(p, dtype=float) for p in true_positions]).reshape(-1, 3)
        names = list(names) if names is not None else [str(i) for i in range(len(pts))]
        dt = self.period if self._last_t is None else max(t - self._last_t, 0.0)
        self._last_t = t
        if not self.enabled or len(pts) == 0:
            return []
        rng = self.rng
        vis = self.visible(pts)

        for i in range(len(pts)):
            u = rng.random()
            if not vis[i]:
                continue
            fresh = i not in self._primary or t - self._last_seen.get(i, -math.inf) > self.coast_s + 1e-9
            if fresh:
                self._primary[i] = self._new_id()
            elif u < per_step_probability(self.drop_prob_per_s, dt):
                old = self._primary[i]
                self._primary[i] = self._new_id()
                self.events.append((t, "drop", {"owner": names[i], "old": old, "new": self._primary[i]}))
            self._last_seen[i] = t

        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                u = rng.random()
                close = bool(vis[i] and vis[j] and np.linalg.norm(pts[i] - pts[j]) < self.proximity_m)
                if close and (i, j) not in self._near and u < self.swap_prob_on_proximity:
                    self._primary[i], self._primary[j] = self._primary[j], self._primary[i]
                    self.events.append((t, "swap", {"owners": [names[i], names[j]],
                                                    "ids": [self._primary[j], self._primary[i]]}))
                if close:
                    self._near.add((i, j))
                else:
                    self._near.discard((i, j))

        self._dups = [d for d in self._dups if d.until > t]
        for i in range(len(pts)):
            u = rng.random()
            if vis[i] and u < per_step_probability(self.duplicate_prob_per_s, dt):
                life = rng.uniform(*self.duplicate_lifetime)
                d = _Duplicate(self._new_id(), i, t + life, rng.normal(0.0, 2.0, 3))
                self._dups.append(d)
                self.events.append((t, "duplicate", {"owner": names[i], "id": d.track_id}))

        out: List[RadarSample] = []
        rframe = self.to_radar_frame(pts)
        sd = np.asarray(self.noise_sd, dtype=float)
        for i in range(len(pts)):
            if not vis[i]:
                continue
            rae = cartesian_to_rae(rframe[i])[0] + rng.normal(0.0, 1.0, 3) * sd
            out.append(RadarSample(t, self._primary[i], tuple(rae), tuple(self._report(rae)[0]), names[i]))
        for d in self._dups:
            if not vis[d.owner]:
                continue
            truth = cartesian_to_rae(rframe[d.owner] + d.bias)[0]
            rae = truth + rng.normal(0.0, 1.0, 3) * sd
            out.append(RadarSample(t, d.track_id, tuple(rae), tuple(self._report(rae)[0]), names[d.owner], True))
        out.sort(key=lambda s: s.track_id)
        return out


def radar_step(r: SyntheticRadar, true_positions, t: float, names=None) -> List[RadarSample]:
    return r.step(true_positions, t, names)


def samples_to_raw_tracks(samples: Sequence[RadarSample]) -> List[RawRadarTrack]:
    by_id: Dict[int, list] = {}
    for s in samples:
        by_id.setdefault(s.track_id, []).append(s)
    return [RawRadarTrack(tid, [s.t for s in ss], [s.rae for s in ss]) for tid, ss in sorted(by_id.items())]


def calibration_flight(true_pose: RadarPose, origin: GeodeticPoint, duration: float = 216.0,
                       rate_hz: float = 5.0, gps_rate_hz: float = 10.0,
                       noise_h: float = 1.0, noise_v: float = 2.0,
                       drop_prob_per_s: float = 0.02, duplicate_prob_per_s: float = 0.02,
                       seed: int = 0) -> Tuple[List[RawRadarTrack], np.ndarray, np.ndarray]:
    """Circles and vertical passes in front of the radar.

    Returns the raw radar tracks plus GPS times and ENU positions.  Radar
    noise is added in ENU (``noise_h`` per horizontal axis, ``noise_v``
    vertically) before conversion to the radar frame.
    """
    rng = np.random.default_rng(seed)
    rpos = geodetic_to_enu(true_pose.position, origin).vector
    rot = true_pose.orientation.as_matrix()
    yaw = math.radians(true_pose.yaw)
    boresight = np.array([math.sin(yaw), math.cos(yaw), 0.0])
    left = np.array([-boresight[1], boresight[0], 0.0])

    def truth(t):
        # 300 m out, 60 m circle, altitude swinging between 15 and 75 m
        center = rpos + 300.0 * boresight
        a = 2 * math.pi * t / 54.0
        p = center + 60.0 * (math.cos(a) * boresight + math.sin(a) * left)
        p[2] = rpos[2] + 45.0 + 30.0 * math.sin(2 * math.pi * t / 40.0)
        return p

    gps_t = np.arange(0.0, duration, 1.0 / gps_rate_hz)
    gps = np.array([truth(t) for t in gps_t]) + rng.normal(0.0, 0.3, (len(gps_t), 3))

    samples = []
    tid, next_id, dup = 1, 2, None
    period = 1.0 / rate_hz
    for t in np.arange(0.0, duration, period):
        p = truth(t)
        if rng.random() < per_step_probability(drop_prob_per_s, period):
            tid, next_id = next_id, next_id + 1
        noise = rng.normal(0.0, 1.0, 3) * np.array([noise_h, noise_h, noise_v])
        rae = cartesian_to_rae((p + noise - rpos) @ rot)[0]
        samples.append(RadarSample(float(t), tid, tuple(rae), tuple(p + noise), "target"))
        if dup is None and rng.random() < per_step_probability(duplicate_prob_per_s, period):
            dup = (next_id, t + rng.uniform(5.0, 20.0), rng.normal(0.0, 6.0, 3))
            next_id += 1
        if dup is not None:
            if t > dup[1]:
                dup = None
            else:
                q = p + dup[2] + rng.normal(0.0, 1.0, 3) * np.array([3 * noise_h, 3 * noise_h, 3 * noise_v])
                samples.append(RadarSample(float(t), dup[0], tuple(cartesian_to_rae((q - rpos) @ rot)[0]),
                                           tuple(q), "target", True))
    return samples_to_raw_tracks(samples), gps_t, gps
