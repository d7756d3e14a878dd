"""Relative-position follow control and chase-geometry analysis.

Three independent PID loops drive an altitude-hold command interface:

=========== ================== ========= ==== ===== ===========
command     process variable   setpoint  kp   ki    kd
=========== ================== ========= ==== ===== ===========
yaw rate    azimuth (deg)      0         0.25 0.002 0.0003 * R
pitch       ground range (m)   30.6      0.4  0.01  0.2
climb rate  relative height    25.7      0.6  0.01  0.02
=========== ================== ========= ==== ===== ===========

Sign conventions: a target to the right of the nose yields a positive
(clockwise) yaw rate; a target beyond the range setpoint yields a positive
pitch command, which here means nose-down, accelerating toward the target;
a target lower than the height setpoint yields a negative climb rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .filters import MedianWindow
from .geo import CameraModel, compass_bearing, wrap_degrees

STALE_AFTER_S = 2.0
CONTROL_PERIOD_S = 0.2


@dataclass
class PidLoop:
    """PID with clamped output and conditional-integration anti-windup.

    The error is ``direction * (setpoint - process_value)``; use
    ``direction=-1`` for a direct-acting loop whose output should rise when
    the process value exceeds the setpoint.  On the first step there is no
    previous error and the derivative term is taken as zero.
    """

    kp: float
    ki: float
    kd: float
    setpoint: float = 0.0
    output_limits: Tuple[float, float] = (-math.inf, math.inf)
    direction: int = 1
    wrap_angle: bool = False
    integral: float = 0.0
    previous_error: Optional[float] = None

    def error(self, process_value: float) -> float:
        e = self.direction * (self.setpoint - process_value)
        return wrap_degrees(e) if self.wrap_angle else e

    def step(self, process_value: float, dt: float) -> float:
        if dt <= 0:
            raise ValueError("dt must be positive")
        lo, hi = self.output_limits
        e = self.error(process_value)
        if self.previous_error is None:
            de = 0.0
        else:
            de = e - self.previous_error
            if self.wrap_angle:
                de = wrap_degrees(de)
        integral = self.integral + e * dt
        if self.ki > 0:
            integral = min(max(integral, lo / self.ki), hi / self.ki)
        u = self.kp * e + self.ki * integral + self.kd * de / dt
        if u > hi or u < lo:
            # saturated: hold the integrator where it was
            integral = self.integral
            u = min(max(self.kp * e + self.ki * integral + self.kd * de / dt, lo), hi)
        self.integral = integral
        self.previous_error = e
        return u

    def reset(self) -> None:
        self.integral = 0.0
        self.previous_error = None


def pid_step(loop: PidLoop, process_value: float, dt: float) -> float:
    return loop.step(process_value, dt)


def yaw_kd(ground_range: float) -> float:
    """Yaw-rate derivative gain, linear in target ground range."""
    if ground_range < 0:
        raise ValueError("ground range must be non-negative")
    return 0.0003 * ground_range


@dataclass(frozen=True)
class RelativeTargetState:
    azimuth: float  # degrees, positive right of the nose
    ground_range: float
    relative_height: float  # ownship above target is positive
    timestamp: float

    def __post_init__(self):
        if self.ground_range < 0:
            raise ValueError("ground_range must be non-negative")


def relative_target_state(chase_position, heading: float, target_position, timestamp: float) -> RelativeTargetState:
    rel = np.asarray(target_position, dtype=float) - np.asarray(chase_position, dtype=float)
    ground = float(math.hypot(rel[0], rel[1]))
    az = wrap_degrees(compass_bearing(rel) - heading) if ground > 0 else 0.0
    return RelativeTargetState(az, ground, float(-rel[2]), timestamp)


@dataclass(frozen=True)
class FollowCommand:
    yaw_rate: float = 0.0  # deg/s, positive clockwise
    pitch: float = 0.0  # deg, positive nose-down
    climb_rate: float = 0.0  # m/s
    hover: bool = False

    def __post_init__(self):
        if self.hover and (self.yaw_rate or self.pitch or self.climb_rate):
            raise ValueError("a hover command carries no rates")

    @classmethod
    def hover_command(cls) -> "FollowCommand":
        return cls(0.0, 0.0, 0.0, True)


@dataclass(frozen=True)
class ChaseGeometry:
    slant_range: float
    elevation_angle: float

    @property
    def ground_range_setpoint(self) -> float:
        return self.slant_range * math.cos(math.radians(self.elevation_angle))

    @property
    def relative_height_setpoint(self) -> float:
        return self.slant_range * math.sin(math.radians(self.elevation_angle))


@dataclass
class FollowConfig:
    yaw_gains: Tuple[float, float] = (0.25, 0.002)
    pitch_gains: Tuple[float, float, float] = (0.4, 0.01, 0.2)
    climb_gains: Tuple[float, float, float] = (0.6, 0.01, 0.02)
    ground_range_setpoint: float = 30.6
    relative_height_setpoint: float = 25.7
    yaw_rate_limit: float = 45.0
    pitch_limit: float = 20.0
    climb_rate_limit: float = 3.0
    median_window: int = 5
    stale_after: float = STALE_AFTER_S
    nominal_period: float = CONTROL_PERIOD_S


class FollowController:
    """Median-filtered three-loop follow controller."""

    def __init__(self, config: Optional[FollowConfig] = None):
        self.config = cfg = config or FollowConfig()
        self.yaw = PidLoop(cfg.yaw_gains[0], cfg.yaw_gains[1], 0.0, 0.0,
                           (-cfg.yaw_rate_limit, cfg.yaw_rate_limit), direction=-1, wrap_angle=True)
        self.pitch = PidLoop(*cfg.pitch_gains, cfg.ground_range_setpoint,
                             (-cfg.pitch_limit, cfg.pitch_limit), direction=-1)
        self.climb = PidLoop(*cfg.climb_gains, cfg.relative_height_setpoint,
                             (-cfg.climb_rate_limit, cfg.climb_rate_limit), direction=1)
        self._medians = [MedianWindow(cfg.median_window) for _ in range(3)]
        self.last_target_time: Optional[float] = None
        self._last_step_time: Optional[float] = None

    def reset(self) -> None:
        for loop in (self.yaw, self.pitch, self.climb):
            loop.reset()
        for m in self._medians:
            m.clear()
        self._last_step_time = None

    def step(self, target: RelativeTargetState, now: float) -> FollowCommand:
        az = self._medians[0].push(target.azimuth)
        rng = self._medians[1].push(target.ground_range)
        height = self._medians[2].push(target.relative_height)
        if self._last_step_time is None or now <= self._last_step_time:
            dt = self.config.nominal_period
        else:
            dt = now - self._last_step_time
        self._last_step_time = now
        self.last_target_time = target.timestamp
        self.yaw.kd = yaw_kd(rng)
        return FollowCommand(
            yaw_rate=self.yaw.step(az, dt),
            pitch=self.pitch.step(rng, dt),
            climb_rate=self.climb.step(height, dt),
        )

    def staleness_guard(self, now: float) -> Optional[FollowCommand]:
        """Hover (and reset integrators) once target updates are older than the timeout."""
        if self.last_target_time is None or now - self.last_target_time > self.config.stale_after:
            self.reset()
            return FollowCommand.hover_command()
        return None

    def shutdown(self) -> FollowCommand:
        self.reset()
        return FollowCommand.hover_command()


def follow_step(controller: FollowController, target: RelativeTargetState, now: float) -> FollowCommand:
    return controller.step(target, now)


def staleness_guard(controller: FollowController, now: float) -> Optional[FollowCommand]:
    return controller.staleness_guard(now)


@dataclass(frozen=True)
class ChaseCandidate:
    slant_range: float
    elevation: float
    ground_range: float
    relative_height: float
    pixels_on_target: float
    vertical_reaction_s: float
    horizontal_reaction_s: float
    acceptable: bool


def critical_dimension_px(target_size: float, distance: float, cam: CameraModel) -> float:
    """Pinhole sqrt(bbox_w * bbox_h) for a target of ``target_size`` on the boresight."""
    fx, fy = cam.focal_px
    return target_size * math.sqrt(fx * fy) / distance


def chase_geometry_analysis(target_size: float, target_vmax_h: float, target_vmax_v: float,
                            cam: CameraModel, min_pixels: float,
                            ranges: Sequence[float] = tuple(range(10, 81, 5)),
                            elevations: Sequence[float] = tuple(range(10, 81, 5))) -> List[ChaseCandidate]:
    """Evaluate candidate follow positions over a (slant range, elevation) sweep.

    For each candidate, with the camera tilted down by the elevation so the
    target sits on the boresight:

    * pixels on target from the pinhole projection;
    * seconds until a target climbing at ``target_vmax_v`` reaches the
      ownship's horizon line (infinite when directly overhead, since the
      line of sight never sweeps);
    * seconds until a target moving horizontally at ``target_vmax_h``
      toward or away from the ownship leaves the vertical FOV, taking the
      quicker direction.
    """
    if min(target_size, target_vmax_h, target_vmax_v) <= 0:
        raise ValueError("target size and speeds must be positive")
    half_v = cam.vertical_fov / 2.0
    rows = []
    for r in ranges:
        for el in elevations:
            geo = ChaseGeometry(float(r), float(el))
            g, h = geo.ground_range_setpoint, geo.relative_height_setpoint
            px = critical_dimension_px(target_size, float(r), cam)
            overhead = abs(el - 90.0) < 1e-9 or g < 1e-9
            t_vert = math.inf if overhead else h / target_vmax_v
            exits = []
            lower = el + half_v  # depression of the lower FOV edge
            if lower < 90.0:
                exits.append(abs(g - h / math.tan(math.radians(lower))))
            upper = el - half_v
            if upper > 0.0:
                exits.append(abs(h / math.tan(math.radians(upper)) - g))
            t_horz = min(exits) / target_vmax_h if exits else math.inf
            rows.append(ChaseCandidate(float(r), float(el), g, h, px, t_vert, t_horz, px >= min_pixels))
    return rows
