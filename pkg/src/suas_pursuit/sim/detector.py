"""Synthetic vision detector gated by pixels on target."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..geo import BoundingBox, CameraModel, EnuPoint, OwnshipPose, enu_to_camera, in_frustum_camera, project_to_pixel


@dataclass
class SyntheticDetector:
    cam: CameraModel
    min_pixels: float = 10.0
    detect_prob_given_visible: float = 0.9
    pixel_noise_sd: float = 2.0
    target_size: float = 0.35
    rng_seed: int = 0
    enabled: bool = True

    def __post_init__(self):
        if not 0.0 <= self.detect_prob_given_visible <= 1.0:
            raise ValueError("detect_prob_given_visible must lie in [0, 1]")
        self.rng = np.random.default_rng(self.rng_seed)

    def pixels_on_target(self, depth: float) -> float:
        fx, fy = self.cam.focal_px
        return self.target_size * math.sqrt(fx * fy) / depth

    def step(self, pose: OwnshipPose, target: EnuPoint, t: float) -> Optional[BoundingBox]:
        # draw every call so the stream does not depend on visibility
        u = self.rng.random()
        noise = self.rng.normal(0.0, self.pixel_noise_sd, 2)
        if not self.enabled:
            return None
        c = enu_to_camera(target.vector, self.cam, pose)
        if not in_frustum_camera(c[None, :], self.cam, self.cam.max_detection_range)[0]:
            return None
        if self.pixels_on_target(c[0]) < self.min_pixels or u >= self.detect_prob_given_visible:
            return None
        uv = project_to_pixel(target, self.cam, pose)
        if uv is None:
            return None
        fx, fy = self.cam.focal_px
        w = fx * self.target_size / c[0]
        h = fy * self.target_size / c[0]
        cu = min(max(uv[0] + noise[0], w / 2), self.cam.width_px - w / 2)
        cv = min(max(uv[1] + noise[1], h / 2), self.cam.height_px - h / 2)
        conf = min(1.0, 0.5 + 0.5 * math.sqrt(w * h) / (2 * self.min_pixels)) if self.min_pixels > 0 else 1.0
        return BoundingBox(cu, cv, w, h, conf)


def detector_step(d: SyntheticDetector, chase_pose: OwnshipPose, target: EnuPoint, t: float) -> Optional[BoundingBox]:
    return d.step(chase_pose, target, t)
