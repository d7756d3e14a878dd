"""Radar orientation calibration from a single cooperative flight.

The radar reports (range, azimuth, elevation) in its own frame: azimuth is
measured from the boresight, positive clockwise seen from above, and
elevation is positive up.  The radar pose maps that frame into ENU with the
same yaw/pitch/roll convention used for vehicles (see :mod:`suas_pursuit.geo`).

Calibration picks a candidate track, pairs half-second window means of the
track with window means of the flight's GPS, and least-squares fits the
orientation angles with the surveyed position held fixed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import least_squares

from .geo import EnuPoint, GeodeticPoint, Quaternion, enu_to_geodetic, geodetic_to_enu

log = logging.getLogger(__name__)

POOR_FIT_SD_M = 10.0
# six-parameter fits whose parameter standard errors exceed these are flagged
MAX_POSITION_SE_M = 5.0
MAX_ANGLE_SE_DEG = 1.0


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class RadarPose:
    position: GeodeticPoint
    yaw: float = 0.0
    pitch: float = 0.0
    roll: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(a) for a in (self.yaw, self.pitch, self.roll)):
            raise ValueError("radar angles must be finite")
        object.__setattr__(self, "yaw", self.yaw % 360.0)

    @property
    def orientation(self) -> Quaternion:
        return Quaternion.from_euler(self.yaw, self.pitch, self.roll)


@dataclass
class RawRadarTrack:
    """Radar-frame measurements: columns are range (m), azimuth (deg), elevation (deg)."""

    track_id: int
    times: np.ndarray
    rae: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.rae = np.asarray(self.rae, dtype=float).reshape(-1, 3)
        if len(self.times) != len(self.rae):
            raise ValueError("times and measurements differ in length")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("track timestamps must be strictly increasing")

    @property
    def lifetime(self) -> float:
        return float(self.times[-1] - self.times[0]) if len(self.times) else 0.0


@dataclass
class CalibrationResult:
    fitted_pose: RadarPose
    residual_sd_enu: Tuple[float, float, float]
    selected_track_id: int
    n_windows: int
    converged: bool = True
    low_confidence: bool = False
    experimental: bool = False
    notes: List[str] = field(default_factory=list)
    method: Optional[str] = None

    @property
    def total_residual(self) -> float:
        """Root-sum-square of the per-axis residual SDs."""
        return float(np.sqrt(np.sum(np.square(self.residual_sd_enu))))

    @property
    def poor_fit(self) -> bool:
        return max(self.residual_sd_enu) > POOR_FIT_SD_M


def rae_to_cartesian(rae) -> np.ndarray:
    """Radar-frame (FLU) cartesian from (range, az clockwise, el up)."""
    rae = np.atleast_2d(np.asarray(rae, dtype=float))
    r = rae[:, 0]
    az = np.radians(rae[:, 1])
    el = np.radians(rae[:, 2])
    return np.column_stack([r * np.cos(el) * np.cos(az), -r * np.cos(el) * np.sin(az), r * np.sin(el)])


def cartesian_to_rae(xyz) -> np.ndarray:
    xyz = np.atleast_2d(np.asarray(xyz, dtype=float))
    r = np.linalg.norm(xyz, axis=1)
    az = np.degrees(np.arctan2(-xyz[:, 1], xyz[:, 0]))
    el = np.degrees(np.arctan2(xyz[:, 2], np.hypot(xyz[:, 0], xyz[:, 1])))
    return np.column_stack([r, az, el])


def radar_to_enu(radar_xyz, pose: RadarPose, origin: GeodeticPoint) -> np.ndarray:
    """Radar-frame cartesian points to ENU about ``origin``."""
    pos = geodetic_to_enu(pose.position, origin).vector
    return np.atleast_2d(radar_xyz) @ pose.orientation.as_matrix().T + pos


def select_longest_track(tracks: Sequence[RawRadarTrack]) -> RawRadarTrack:
    if not tracks:
        raise ValueError("no tracks to choose from")
    return min(tracks, key=lambda tr: (-tr.lifetime, tr.track_id))


def window_pairs(track: RawRadarTrack, gps_times, gps_enu, window: float = 0.5) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Per-window means of radar-frame cartesian and GPS ENU positions.

    Windows are aligned to the start of the overlap.  Windows lacking a
    sample from either source are dropped.
    """
    gt = np.asarray(gps_times, dtype=float)
    gp = np.asarray(gps_enu, dtype=float).reshape(-1, 3)
    if len(track.times) == 0 or len(gt) == 0:
        raise ValueError("radar track and GPS trace must be non-empty")
    t0 = max(track.times[0], gt[0])
    t1 = min(track.times[-1], gt[-1])
    if t1 < t0:
        raise ValueError("radar track and GPS trace do not overlap in time")
    xyz = rae_to_cartesian(track.rae)
    rb = np.floor((track.times - t0) / window).astype(int)
    gb = np.floor((gt - t0) / window).astype(int)
    n_bins = int(math.floor((t1 - t0) / window)) + 1
    pairs = []
    for k in range(n_bins):
        rm = (rb == k) & (track.times >= t0) & (track.times <= t1)
        gm = (gb == k) & (gt >= t0) & (gt <= t1)
        if rm.any() and gm.any():
            pairs.append((xyz[rm].mean(axis=0), gp[gm].mean(axis=0)))
    if not pairs:
        raise ValueError("no window holds samples from both sources")
    return pairs


def _stack(pairs) -> Tuple[np.ndarray, np.ndarray]:
    return np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs])


def _rotation(angles) -> np.ndarray:
    return Quaternion.from_euler(*angles).as_matrix()


def _geometry_degenerate(radar_xyz: np.ndarray) -> bool:
    u = radar_xyz / np.linalg.norm(radar_xyz, axis=1, keepdims=True)
    s = np.linalg.svd(u - u.mean(axis=0), compute_uv=False)
    return len(u) < 3 or s[0] < 1e-9 or s[1] / s[0] < 1e-3


def fit_orientation(pairs, initial: RadarPose, origin: GeodeticPoint) -> CalibrationResult:
    """Yaw/pitch/roll minimizing the window-mean ENU mismatch; position held fixed."""
    if len(pairs) < 3:
        raise ValueError("at least 3 windows are needed to fit an orientation")
    radar_xyz, gps = _stack(pairs)
    pos = geodetic_to_enu(initial.position, origin).vector

    def residuals(a):
        return (radar_xyz @ _rotation(a).T + pos - gps).ravel()

    x0 = np.array([initial.yaw, initial.pitch, initial.roll])
    sol = least_squares(residuals, x0, method="lm", x_scale=1.0)
    res = sol.fun.reshape(-1, 3)
    pose = RadarPose(initial.position, *sol.x)
    out = CalibrationResult(pose, tuple(float(s) for s in res.std(axis=0)), -1, len(pairs),
                            converged=sol.success)
    if _geometry_degenerate(radar_xyz):
        out.low_confidence = True
        out.notes.append("track geometry is nearly collinear from the radar")
    return out


def fit_track(track: RawRadarTrack, gps_times, gps_enu, initial: RadarPose, origin: GeodeticPoint,
              window: float = 0.5) -> CalibrationResult:
    res = fit_orientation(window_pairs(track, gps_times, gps_enu, window), initial, origin)
    res.selected_track_id = track.track_id
    return res


def calibrate_longest(tracks, gps_times, gps_enu, initial, origin, window=0.5) -> CalibrationResult:
    return fit_track(select_longest_track(tracks), gps_times, gps_enu, initial, origin, window)


def select_best_residual_track(tracks: Sequence[RawRadarTrack], gps_times, gps_enu, initial: RadarPose,
                               origin: GeodeticPoint, window: float = 0.5) -> CalibrationResult:
    """Fit every track and keep the one with the smallest total residual."""
    if not tracks:
        raise ValueError("no tracks to choose from")
    best = None
    for tr in sorted(tracks, key=lambda t: t.track_id):
        try:
            res = fit_track(tr, gps_times, gps_enu, initial, origin, window)
        except ValueError as exc:
            log.debug("track %d skipped: %s", tr.track_id, exc)
            continue
        if res.low_confidence:
            continue
        if best is None or res.total_residual < best.total_residual:
            best = res
    if best is None:
        raise CalibrationError("every candidate track produced a degenerate fit")
    return best


def fit_six_parameter(pairs, initial: RadarPose, origin: GeodeticPoint) -> CalibrationResult:
    """Joint orientation and position fit.  Experimental: poorly conditioned on short tracks."""
    if len(pairs) < 3:
        raise ValueError("at least 3 windows are needed to fit a pose")
    radar_xyz, gps = _stack(pairs)
    pos0 = geodetic_to_enu(initial.position, origin).vector

    def residuals(x):
        return (radar_xyz @ _rotation(x[:3]).T + x[3:] - gps).ravel()

    x0 = np.concatenate([[initial.yaw, initial.pitch, initial.roll], pos0])
    sol = least_squares(residuals, x0, method="lm")
    res = sol.fun.reshape(-1, 3)
    position = enu_to_geodetic(EnuPoint.from_vector(sol.x[3:], origin))
    out = CalibrationResult(RadarPose(position, *sol.x[:3]), tuple(float(s) for s in res.std(axis=0)), -1,
                            len(pairs), converged=bool(sol.success), experimental=True)
    out.notes.append("six-parameter fit is experimental")
    jac = sol.jac
    sv = np.linalg.svd(jac, compute_uv=False)
    cond = sv[0] / sv[-1] if sv[-1] > 0 else math.inf
    if not sol.success:
        out.low_confidence = True
        out.notes.append(f"optimizer did not converge: {sol.message}")
    dof = max(res.size - 6, 1)
    cov = float(np.sum(res**2)) / dof * np.linalg.pinv(jac.T @ jac)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    if se[3:].max() > MAX_POSITION_SE_M or se[:3].max() > MAX_ANGLE_SE_DEG:
        out.low_confidence = True
        out.notes.append("parameters poorly determined (standard errors %.2g deg, %.2g m)"
                         % (se[:3].max(), se[3:].max()))
    if cond > 1e6 or _geometry_degenerate(radar_xyz):
        out.low_confidence = True
        out.notes.append(f"ill-conditioned problem (condition number {cond:.3g})")
    if out.poor_fit:
        out.low_confidence = True
        out.notes.append("residual SD exceeds %.0f m" % POOR_FIT_SD_M)
    return out
