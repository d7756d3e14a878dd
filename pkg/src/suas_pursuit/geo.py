"""Coordinate frames and the transforms between them.

Frames used throughout the package:

* geodetic: WGS84 latitude/longitude in degrees, altitude in meters.
* ENU: local east-north-up tangent plane anchored at a geodetic origin.
* body: forward-left-up (FLU), attached to the vehicle.
* camera: also FLU-style, x along the boresight, y toward image-left,
  z toward image-up.
* pixel: origin at the top-left image corner, u to the right, v down,
  continuous coordinates spanning ``[0, width] x [0, height]``.

Human-readable orientation uses yaw/pitch/roll in degrees, applied Z-Y-X
intrinsic.  Yaw is a compass heading (clockwise from north), pitch is
positive nose-up and roll is positive right-wing-down.  Internally all
rotations are unit quaternions.

The geodetic conversion is a tangent-plane linearization using the
meridian and prime-vertical radii at the origin.  For offsets up to 1 km
the horizontal error against a full ECEF conversion stays below roughly
0.1 m, which is well under the radar and GPS noise this package deals with.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

WGS84_A = 6378137.0
WGS84_F = 1.0 / 298.257223563
WGS84_E2 = WGS84_F * (2.0 - WGS84_F)

_UNIT_TOL = 1e-9
_POLE_TOL = 1e-9


class FrameError(ValueError):
    """Raised when points from different local frames are mixed."""


@dataclass(frozen=True)
class GeodeticPoint:
    latitude: float
    longitude: float
    altitude: float = 0.0

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise ValueError(f"latitude {self.latitude} outside [-90, 90]")
        if not -180.0 <= self.longitude <= 180.0:
            raise ValueError(f"longitude {self.longitude} outside [-180, 180]")
        if not math.isfinite(self.altitude):
            raise ValueError("altitude must be finite")


@dataclass(frozen=True)
class EnuPoint:
    east: float
    north: float
    up: float
    origin: GeodeticPoint = field(default_factory=lambda: GeodeticPoint(0.0, 0.0, 0.0))

    def __post_init__(self):
        if not all(math.isfinite(c) for c in (self.east, self.north, self.up)):
            raise ValueError("ENU components must be finite")

    @classmethod
    def from_vector(cls, v: Sequence[float], origin: GeodeticPoint) -> "EnuPoint":
        return cls(float(v[0]), float(v[1]), float(v[2]), origin)

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.east, self.north, self.up])

    def _check_frame(self, other: "EnuPoint") -> None:
        if self.origin != other.origin:
            raise FrameError("EnuPoints have different origins")

    def __sub__(self, other: "EnuPoint") -> np.ndarray:
        self._check_frame(other)
        return self.vector - other.vector

    def offset(self, delta: Sequence[float]) -> "EnuPoint":
        return EnuPoint.from_vector(self.vector + np.asarray(delta, dtype=float), self.origin)

    def distance_to(self, other: "EnuPoint") -> float:
        return float(np.linalg.norm(self - other))


def _tangent_radii(origin: GeodeticPoint) -> Tuple[float, float]:
    if abs(abs(origin.latitude) - 90.0) < _POLE_TOL:
        raise ValueError("tangent plane undefined at the poles")
    phi = math.radians(origin.latitude)
    s2 = math.sin(phi) ** 2
    w = math.sqrt(1.0 - WGS84_E2 * s2)
    meridian = WGS84_A * (1.0 - WGS84_E2) / w**3
    prime_vertical = WGS84_A / w
    east_scale = (prime_vertical + origin.altitude) * math.cos(phi)
    north_scale = meridian + origin.altitude
    return east_scale, north_scale


def geodetic_to_enu(p: GeodeticPoint, origin: GeodeticPoint) -> EnuPoint:
    """Local tangent-plane coordinates of ``p`` relative to ``origin``."""
    if abs(abs(p.latitude) - 90.0) < _POLE_TOL:
        raise ValueError("tangent plane undefined at the poles")
    east_scale, north_scale = _tangent_radii(origin)
    dlon = p.longitude - origin.longitude
    dlon = (dlon + 180.0) % 360.0 - 180.0
    east = math.radians(dlon) * east_scale
    north = math.radians(p.latitude - origin.latitude) * north_scale
    return EnuPoint(east, north, p.altitude - origin.altitude, origin)


def enu_to_geodetic(p: EnuPoint) -> GeodeticPoint:
    east_scale, north_scale = _tangent_radii(p.origin)
    lat = p.origin.latitude + math.degrees(p.north / north_scale)
    lon = p.origin.longitude + math.degrees(p.east / east_scale)
    lon = (lon + 180.0) % 360.0 - 180.0
    if not -90.0 < lat < 90.0:
        raise ValueError("ENU offset maps beyond a pole")
    return GeodeticPoint(lat, lon, p.origin.altitude + p.up)


@dataclass(frozen=True)
class Quaternion:
    """Hamilton quaternion, scalar first.  Composition ``a * b`` applies b then a."""

    w: float = 1.0
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    @classmethod
    def identity(cls) -> "Quaternion":
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_axis_angle(cls, axis: Sequence[float], angle_deg: float) -> "Quaternion":
        a = np.asarray(axis, dtype=float)
        n = np.linalg.norm(a)
        if n == 0.0:
            raise ValueError("rotation axis must be non-zero")
        a = a / n
        half = math.radians(angle_deg) / 2.0
        s = math.sin(half)
        return cls(math.cos(half), a[0] * s, a[1] * s, a[2] * s)

    @classmethod
    def from_rotation_vector(cls, rv: Sequence[float]) -> "Quaternion":
        rv = np.asarray(rv, dtype=float)
        theta = float(np.linalg.norm(rv))
        if theta < 1e-12:
            # second-order small-angle expansion
            return cls(1.0 - theta**2 / 8.0, *(0.5 * rv)).normalized()
        s = math.sin(theta / 2.0) / theta
        return cls(math.cos(theta / 2.0), rv[0] * s, rv[1] * s, rv[2] * s)

    @classmethod
    def from_euler(cls, yaw: float, pitch: float = 0.0, roll: float = 0.0) -> "Quaternion":
        """Body(FLU)->ENU rotation from compass yaw, nose-up pitch, right-down roll (degrees)."""
        qz = cls.from_axis_angle((0.0, 0.0, 1.0), 90.0 - yaw)
        qy = cls.from_axis_angle((0.0, 1.0, 0.0), -pitch)
        qx = cls.from_axis_angle((1.0, 0.0, 0.0), roll)
        return qz * qy * qx

    def to_euler(self) -> Tuple[float, float, float]:
        """Inverse of :meth:`from_euler`; yaw in [0, 360)."""
        m = self.as_matrix()
        # m = Rz(psi) Ry(theta) Rx(phi) with psi = 90 - yaw, theta = -pitch
        theta = math.asin(max(-1.0, min(1.0, -m[2, 0])))
        psi = math.atan2(m[1, 0], m[0, 0])
        phi = math.atan2(m[2, 1], m[2, 2])
        yaw = (90.0 - math.degrees(psi)) % 360.0
        return yaw, -math.degrees(theta), math.degrees(phi)

    @property
    def array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    def norm(self) -> float:
        return math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)

    def normalized(self) -> "Quaternion":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize a zero quaternion")
        return Quaternion(self.w / n, self.x / n, self.y / n, self.z / n)

    def conjugate(self) -> "Quaternion":
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def __mul__(self, o: "Quaternion") -> "Quaternion":
        return Quaternion(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )

    def as_matrix(self) -> np.ndarray:
        self._require_unit()
        w, x, y, z = self.w, self.x, self.y, self.z
        return np.array([
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ])

    def as_rotation_vector(self) -> np.ndarray:
        q = self if self.w >= 0 else Quaternion(-self.w, -self.x, -self.y, -self.z)
        v = np.array([q.x, q.y, q.z])
        s = float(np.linalg.norm(v))
        if s < 1e-12:
            return 2.0 * v
        angle = 2.0 * math.atan2(s, q.w)
        return v * (angle / s)

    def _require_unit(self) -> None:
        if abs(self.norm() - 1.0) > _UNIT_TOL:
            raise ValueError(f"quaternion is not unit norm (|q|={self.norm():.12f})")

    def rotate(self, v: Sequence[float]) -> np.ndarray:
        return rotate(self, v)


def rotate(q: Quaternion, v: Sequence[float]) -> np.ndarray:
    """Rotate a 3-vector, or an (N, 3) array of them, by unit quaternion ``q``."""
    return np.asarray(v, dtype=float) @ q.as_matrix().T


def wrap_degrees(angle):
    """Wrap to (-180, 180]."""
    a = np.mod(np.asarray(angle, dtype=float) + 180.0, 360.0) - 180.0
    a = np.where(a == -180.0, 180.0, a)
    return float(a) if a.ndim == 0 else a


def compass_bearing(vec: Sequence[float]) -> float:
    """Compass bearing in degrees [0, 360) of the horizontal part of an ENU vector."""
    return math.degrees(math.atan2(vec[0], vec[1])) % 360.0


@dataclass(frozen=True)
class OwnshipPose:
    position: EnuPoint
    orientation: Quaternion  # body -> ENU
    timestamp: float = 0.0

    def __post_init__(self):
        self.orientation._require_unit()


@dataclass(frozen=True)
class CameraModel:
    horizontal_fov: float = 90.0
    vertical_fov: float = 60.0
    width_px: int = 3840
    height_px: int = 2160
    mount_translation: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    mount_orientation: Quaternion = field(default_factory=Quaternion.identity)  # camera -> body
    max_detection_range: float = 100.0

    def __post_init__(self):
        for name in ("horizontal_fov", "vertical_fov"):
            fov = getattr(self, name)
            if not 0.0 < fov < 180.0:
                raise ValueError(f"{name} must lie in (0, 180), got {fov}")
        if self.width_px < 1 or self.height_px < 1:
            raise ValueError("image dimensions must be >= 1 pixel")
        if self.max_detection_range <= 0:
            raise ValueError("max_detection_range must be positive")

    @classmethod
    def tilted(cls, tilt_down_deg: float, **kwargs) -> "CameraModel":
        """Camera fixed to the body with its boresight pitched down by ``tilt_down_deg``."""
        mount = Quaternion.from_axis_angle((0.0, 1.0, 0.0), tilt_down_deg)
        return cls(mount_orientation=mount, **kwargs)

    @property
    def tan_half_h(self) -> float:
        return math.tan(math.radians(self.horizontal_fov) / 2.0)

    @property
    def tan_half_v(self) -> float:
        return math.tan(math.radians(self.vertical_fov) / 2.0)

    @property
    def focal_px(self) -> Tuple[float, float]:
        """Pinhole focal lengths (fx, fy) in pixels."""
        return (self.width_px / 2.0) / self.tan_half_h, (self.height_px / 2.0) / self.tan_half_v


@dataclass(frozen=True)
class BoundingBox:
    center_x_px: float
    center_y_px: float
    width_px: float
    height_px: float
    confidence: float = 1.0

    def __post_init__(self):
        if self.width_px <= 0 or self.height_px <= 0:
            raise ValueError("bounding box width and height must be positive")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must lie in [0, 1]")

    @property
    def critical_dimension(self) -> float:
        return math.sqrt(self.width_px * self.height_px)

    def within(self, cam: CameraModel) -> bool:
        hw, hh = self.width_px / 2.0, self.height_px / 2.0
        return (self.center_x_px - hw >= 0.0 and self.center_x_px + hw <= cam.width_px
                and self.center_y_px - hh >= 0.0 and self.center_y_px + hh <= cam.height_px)


def camera_orientation(cam: CameraModel, pose: OwnshipPose) -> Quaternion:
    """Camera -> ENU rotation."""
    return pose.orientation * cam.mount_orientation


def camera_position(cam: CameraModel, pose: OwnshipPose) -> np.ndarray:
    return pose.position.vector + rotate(pose.orientation, cam.mount_translation)


def pixel_to_camera_ray(u: float, v: float, cam: CameraModel) -> np.ndarray:
    """Unit ray in the camera frame through continuous pixel (u, v)."""
    if not (0.0 <= u <= cam.width_px and 0.0 <= v <= cam.height_px):
        raise ValueError(f"pixel ({u}, {v}) outside the {cam.width_px}x{cam.height_px} image")
    left = -cam.tan_half_h * (2.0 * u / cam.width_px - 1.0)
    up = -cam.tan_half_v * (2.0 * v / cam.height_px - 1.0)
    ray = np.array([1.0, left, up])
    return ray / np.linalg.norm(ray)


def pixel_to_direction(pixel: Tuple[float, float], cam: CameraModel, pose: OwnshipPose) -> np.ndarray:
    """Unit ENU direction from the camera through ``pixel`` (pinhole model)."""
    ray = pixel_to_camera_ray(pixel[0], pixel[1], cam)
    return rotate(camera_orientation(cam, pose), ray)


def target_enu_from_bbox(b: BoundingBox, cam: CameraModel, pose: OwnshipPose, range_m: float) -> EnuPoint:
    """Place the box center at ``range_m`` from the camera along its pixel ray."""
    if range_m <= 0:
        raise ValueError("range must be positive")
    d = pixel_to_direction((b.center_x_px, b.center_y_px), cam, pose)
    return EnuPoint.from_vector(camera_position(cam, pose) + range_m * d, pose.position.origin)


def enu_to_camera(points, cam: CameraModel, pose: OwnshipPose) -> np.ndarray:
    """ENU points (3,) or (N, 3) expressed in the camera frame."""
    rel = np.asarray(points, dtype=float) - camera_position(cam, pose)
    return rotate(camera_orientation(cam, pose).conjugate(), rel)


def project_to_pixel(point: EnuPoint, cam: CameraModel, pose: OwnshipPose) -> Optional[Tuple[float, float]]:
    """Pixel coordinates of an ENU point, or None if it is behind the camera."""
    c = enu_to_camera(point.vector, cam, pose)
    if c[0] <= 0.0:
        return None
    fx, fy = cam.focal_px
    u = cam.width_px / 2.0 - fx * c[1] / c[0]
    v = cam.height_px / 2.0 - fy * c[2] / c[0]
    return float(u), float(v)


def in_frustum_camera(c: np.ndarray, cam: CameraModel, max_range: Optional[float] = None) -> np.ndarray:
    """Boolean mask for camera-frame points inside the pinhole frustum and range limit."""
    c = np.atleast_2d(c)
    x = c[:, 0]
    rng = np.linalg.norm(c, axis=1)
    limit = cam.max_detection_range if max_range is None else max_range
    with np.errstate(divide="ignore", invalid="ignore"):
        ok = ((x > 0.0)
              & (np.abs(c[:, 1]) <= cam.tan_half_h * x)
              & (np.abs(c[:, 2]) <= cam.tan_half_v * x)
              & (rng <= limit))
    return ok


def in_camera_view(point: EnuPoint, cam: CameraModel, pose: OwnshipPose) -> bool:
    return bool(in_frustum_camera(enu_to_camera(point.vector, cam, pose), cam)[0])
