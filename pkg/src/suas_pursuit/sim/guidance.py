"""Point-to-point guidance on the altitude-hold command interface.

Used by the waypoint-style mission controllers (takeoff, flyout to the cue,
search waypoints, return to launch).  The PID follow controller is separate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..follow import FollowCommand
from ..geo import compass_bearing, wrap_degrees
from .plant import PlantConfig


@dataclass
class GuidanceConfig:
    cruise_speed: float = 10.0
    yaw_gain: float = 1.5  # deg/s per deg of heading error
    speed_gain: float = 0.5  # m/s of approach speed per m of distance
    speed_feedback: float = 1.5  # deg of pitch per m/s of speed error
    climb_gain: float = 0.8
    arrive_radius: float = 2.0
    min_altitude: float = 5.0


def goto_command(position: Sequence[float], velocity: Sequence[float], heading: float, goal: Sequence[float],
                 plant: PlantConfig, cfg: GuidanceConfig = GuidanceConfig(),
                 face: Optional[Sequence[float]] = None) -> FollowCommand:
    """Turn toward ``goal``, fly at a distance-scheduled speed, and climb to its altitude.

    When ``face`` is given and the goal is close, the vehicle yaws toward
    ``face`` instead (e.g. to keep the cue in front of the camera).
    """
    p = np.asarray(position, dtype=float)
    g = np.asarray(goal, dtype=float)
    rel = g - p
    d = math.hypot(rel[0], rel[1])
    if face is not None and d < 3 * cfg.arrive_radius:
        f = np.asarray(face, dtype=float) - p
        bearing = compass_bearing(f) if math.hypot(f[0], f[1]) > 1e-6 else heading
    elif d > cfg.arrive_radius:
        bearing = compass_bearing(rel)
    else:
        bearing = heading
    err = wrap_degrees(bearing - heading)
    yaw_rate = float(np.clip(cfg.yaw_gain * err, -plant.max_yaw_rate, plant.max_yaw_rate))

    h = math.radians(heading)
    along = float(np.dot(np.asarray(velocity, dtype=float)[:2], (math.sin(h), math.cos(h))))
    along_goal = rel[0] * math.sin(h) + rel[1] * math.cos(h)
    v_des = min(cfg.cruise_speed, cfg.speed_gain * max(along_goal, 0.0))
    if abs(err) > 60.0:
        v_des = 0.0
    feedforward = v_des * plant.drag / plant.pitch_to_accel_gain
    pitch = float(np.clip(feedforward + cfg.speed_feedback * (v_des - along), -plant.max_pitch, plant.max_pitch))

    alt = max(float(g[2]), cfg.min_altitude)
    climb = float(np.clip(cfg.climb_gain * (alt - p[2]), -plant.max_climb_rate, plant.max_climb_rate))
    return FollowCommand(yaw_rate, pitch, climb)


def standoff_point(chase: Sequence[float], cue: Sequence[float], ground_range: float, height: float) -> np.ndarray:
    """Point ``ground_range`` short of the cue along the approach line, ``height`` above it."""
    c = np.asarray(chase, dtype=float)
    q = np.asarray(cue, dtype=float)
    rel = q[:2] - c[:2]
    d = float(np.linalg.norm(rel))
    back = rel / d if d > 1e-6 else np.array([0.0, 1.0])
    xy = q[:2] - back * ground_range
    return np.array([xy[0], xy[1], q[2] + height])
