"""Chase-vehicle plant with altitude-hold command semantics.

A first-order-lag kinematic model, not multirotor aerodynamics: commanded
pitch and climb rate pass through the same lag; pitch angle produces
acceleration along the heading against linear drag, which sets a terminal
speed; yaw rate integrates directly.  With zero climb command the vertical
rate decays to zero and altitude is held.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..follow import FollowCommand
from ..geo import EnuPoint, GeodeticPoint, OwnshipPose, Quaternion


@dataclass
class PlantConfig:
    max_speed: float = 15.0
    max_climb_rate: float = 3.0
    max_yaw_rate: float = 45.0
    max_pitch: float = 20.0
    pitch_to_accel_gain: float = 0.5  # (m/s^2) per degree
    terminal_speed_at_20deg: float = 15.0
    command_lag: float = 0.3

    @property
    def drag(self) -> float:
        return self.pitch_to_accel_gain * 20.0 / self.terminal_speed_at_20deg


@dataclass
class ChasePlant:
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    heading: float = 0.0  # compass degrees
    pitch: float = 0.0  # degrees, positive nose-down
    config: PlantConfig = field(default_factory=PlantConfig)

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).copy()
        self.velocity = np.asarray(self.velocity, dtype=float).copy()

    @property
    def on_ground(self) -> bool:
        return self.position[2] <= 0.0

    def step(self, cmd: FollowCommand, dt: float) -> "ChasePlant":
        if dt <= 0:
            raise ValueError("dt must be positive")
        c = self.config
        yaw_rate = float(np.clip(cmd.yaw_rate, -c.max_yaw_rate, c.max_yaw_rate))
        pitch_cmd = float(np.clip(cmd.pitch, -c.max_pitch, c.max_pitch))
        climb_cmd = float(np.clip(cmd.climb_rate, -c.max_climb_rate, c.max_climb_rate))

        lag = 1.0 - math.exp(-dt / c.command_lag) if c.command_lag > 0 else 1.0
        self.pitch += (pitch_cmd - self.pitch) * lag
        self.velocity[2] += (climb_cmd - self.velocity[2]) * lag

        if self.on_ground and self.velocity[2] <= 0.0:
            # landed: no horizontal motion, no attitude
            self.velocity[:] = 0.0
            self.pitch = 0.0
            self.position[2] = 0.0
            self.heading = (self.heading + yaw_rate * dt) % 360.0
            return self

        self.heading = (self.heading + yaw_rate * dt) % 360.0
        h = math.radians(self.heading)
        forward = np.array([math.sin(h), math.cos(h)])
        accel = c.pitch_to_accel_gain * self.pitch * forward - c.drag * self.velocity[:2]
        self.velocity[:2] += accel * dt
        speed = float(np.linalg.norm(self.velocity[:2]))
        if speed > c.max_speed:
            self.velocity[:2] *= c.max_speed / speed
        self.position += self.velocity * dt
        if self.position[2] < 0.0:
            self.position[2] = 0.0
            self.velocity[2] = max(self.velocity[2], 0.0)
        return self

    def orientation(self, camera_stabilized: bool = False) -> Quaternion:
        pitch = 0.0 if camera_stabilized else self.pitch
        return Quaternion.from_euler(self.heading, -pitch, 0.0)

    def pose(self, origin: GeodeticPoint, timestamp: float, camera_stabilized: bool = False) -> OwnshipPose:
        return OwnshipPose(EnuPoint.from_vector(self.position, origin), self.orientation(camera_stabilized), timestamp)


def plant_step(p: ChasePlant, cmd: FollowCommand, dt: float) -> ChasePlant:
    return p.step(cmd, dt)
