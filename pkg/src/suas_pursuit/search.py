"""Target belief grid, target dynamics, camera footprint and receding-horizon search.

The belief is a probability per cell of a uniform 3D lattice.  Between
looks it spreads under a truncated Gaussian kernel whose widths grow with
the target's maximum speeds; each look suppresses the cells the camera could
have seen.  The planner enumerates bounded-depth neighbor paths, scoring each
by the discounted belief mass its camera footprints would capture, and the
vehicle takes only the first step before replanning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from .geo import CameraModel, EnuPoint, GeodeticPoint, Quaternion, compass_bearing, in_frustum_camera, rotate

GAIN_THRESHOLD = 0.001
Index = Tuple[int, int, int]


@dataclass(frozen=True)
class GridSpec:
    """Lattice geometry.  ``corner`` is the ENU position of cell (0, 0, 0)."""

    corner: Tuple[float, float, float]
    spacing: float
    dims: Tuple[int, int, int]
    origin: GeodeticPoint = field(default_factory=lambda: GeodeticPoint(0.0, 0.0, 0.0))

    def __post_init__(self):
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")
        if any(n < 1 for n in self.dims):
            raise ValueError("grid dims must be >= 1")

    @classmethod
    def centered(cls, center: Sequence[float], half_extent: float, height: float, spacing: float = 20.0,
                 origin: Optional[GeodeticPoint] = None) -> "GridSpec":
        """Square grid spanning ``half_extent`` each way from ``center``, ``height`` up from its floor."""
        n_h = int(round(2 * half_extent / spacing)) + 1
        n_v = int(round(height / spacing)) + 1
        corner = (center[0] - half_extent, center[1] - half_extent, center[2])
        return cls(corner, spacing, (n_h, n_h, n_v), origin or GeodeticPoint(0.0, 0.0, 0.0))

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    @property
    def floor(self) -> float:
        return self.corner[2]

    def cell_center(self, idx: Index) -> np.ndarray:
        return np.asarray(self.corner) + self.spacing * np.asarray(idx, dtype=float)

    def centers(self) -> np.ndarray:
        """(nx, ny, nz, 3) cell-center coordinates."""
        return _centers(self.corner, self.spacing, self.dims)

    def contains(self, idx: Index) -> bool:
        return all(0 <= i < n for i, n in zip(idx, self.dims))

    def nearest_index(self, point: Sequence[float]) -> Index:
        rel = (np.asarray(point, dtype=float) - np.asarray(self.corner)) / self.spacing
        idx = np.clip(np.rint(rel).astype(int), 0, np.asarray(self.dims) - 1)
        return tuple(int(i) for i in idx)

    def inside(self, point: Sequence[float]) -> bool:
        rel = (np.asarray(point, dtype=float) - np.asarray(self.corner)) / self.spacing
        return bool(np.all(rel >= -0.5) and np.all(rel <= np.asarray(self.dims) - 0.5))

    def flat(self, idx: Index) -> int:
        return int(np.ravel_multi_index(idx, self.dims))

    def unflat(self, k: int) -> Index:
        return tuple(int(i) for i in np.unravel_index(k, self.dims))


@lru_cache(maxsize=16)
def _centers(corner, spacing, dims) -> np.ndarray:
    axes = [corner[a] + spacing * np.arange(dims[a]) for a in range(3)]
    c = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    c.setflags(write=False)
    return c


@dataclass
class BeliefGrid:
    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != tuple(self.spec.dims):
            raise ValueError(f"values shape {self.values.shape} != grid dims {self.spec.dims}")
        if np.any(self.values < 0):
            raise ValueError("belief values must be non-negative")

    @classmethod
    def uniform(cls, spec: GridSpec) -> "BeliefGrid":
        return cls(spec, np.full(spec.dims, 1.0 / spec.size))

    @property
    def origin(self) -> EnuPoint:
        return EnuPoint.from_vector(self.spec.corner, self.spec.origin)

    def total(self) -> float:
        return float(self.values.sum())

    def normalized(self) -> "BeliefGrid":
        s = self.values.sum()
        if s <= 0:
            return BeliefGrid.uniform(self.spec)
        return BeliefGrid(self.spec, self.values / s)

    def overhead(self) -> np.ndarray:
        """Probability summed over the vertical axis, (nx, ny)."""
        return self.values.sum(axis=2)

    def copy(self) -> "BeliefGrid":
        return BeliefGrid(self.spec, self.values.copy())


@dataclass(frozen=True)
class TargetDynamics:
    v_h: float = 10.0
    v_v: float = 5.0

    def __post_init__(self):
        if self.v_h <= 0 or self.v_v <= 0:
            raise ValueError("target speeds must be positive")

    def sigmas(self, dt: float) -> Tuple[float, float, float]:
        return self.v_h * dt, self.v_h * dt, self.v_v * dt


@dataclass(frozen=True)
class SensorFootprint:
    """Flat cell indices seen by the camera, with per-cell detection confidence."""

    indices: np.ndarray
    confidence: np.ndarray

    def __post_init__(self):
        if len(self.indices) != len(self.confidence):
            raise ValueError("indices and confidence must have equal length")
        if np.any((self.confidence < 0) | (self.confidence > 1)):
            raise ValueError("confidence must lie in [0, 1]")

    @classmethod
    def empty(cls) -> "SensorFootprint":
        return cls(np.empty(0, dtype=np.intp), np.empty(0))

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class SensorModel:
    """Camera footprint settings: full confidence out to ``full_confidence_range``, tapering to 0 at max range."""

    camera: CameraModel
    full_confidence_range: float = 60.0

    def confidence(self, distance: np.ndarray) -> np.ndarray:
        r_max = self.camera.max_detection_range
        r_full = min(self.full_confidence_range, r_max)
        if r_max <= r_full:
            return np.where(distance <= r_max, 1.0, 0.0)
        return np.clip((r_max - distance) / (r_max - r_full), 0.0, 1.0)


@dataclass
class PlannedPath:
    waypoints: List[Index]
    gain: float
    horizon: int
    discount: float

    @property
    def first_step(self) -> Index:
        return self.waypoints[1] if len(self.waypoints) > 1 else self.waypoints[0]


def init_belief(detection: Sequence[float], sigma_range: float, sigma_az: float, sigma_el: float,
                spec: GridSpec, sensor_position: Sequence[float] = (0.0, 0.0, 0.0)) -> BeliefGrid:
    """Initial belief from one radar detection and its (range, az, el) uncertainty.

    Sigmas are in meters for range and degrees for the angles.  The spherical
    uncertainty is linearized around the detection into an ENU covariance
    (J diag(s^2) J^T), and the Gaussian is evaluated at every cell center.
    """
    if min(sigma_range, sigma_az, sigma_el) <= 0:
        raise ValueError("sigmas must be positive")
    det = np.asarray(getattr(detection, "vector", detection), dtype=float)
    if not spec.inside(det):
        raise ValueError("detection lies outside the belief grid")
    rel = det - np.asarray(sensor_position, dtype=float)
    r = float(np.linalg.norm(rel))
    ground = math.hypot(rel[0], rel[1])
    az = math.atan2(rel[0], rel[1])
    el = math.atan2(rel[2], ground)
    # columns: d/d(range), d/d(az), d/d(el) of (east, north, up)
    jac = np.array([
        [math.cos(el) * math.sin(az), r * math.cos(el) * math.cos(az), -r * math.sin(el) * math.sin(az)],
        [math.cos(el) * math.cos(az), -r * math.cos(el) * math.sin(az), -r * math.sin(el) * math.cos(az)],
        [math.sin(el), 0.0, r * math.cos(el)],
    ])
    s = np.diag([sigma_range, math.radians(sigma_az), math.radians(sigma_el)]) ** 2
    cov = jac @ s @ jac.T + np.eye(3) * 1e-6
    inv = np.linalg.inv(cov)
    d = spec.centers() - det
    m = np.einsum("...i,ij,...j->...", d, inv, d)
    logw = -0.5 * m
    w = np.exp(logw - logw.max())
    return BeliefGrid(spec, w / w.sum())


def transition_kernel(dyn: TargetDynamics, dt: float, spacing: float) -> np.ndarray:
    """Normalized Gaussian kernel at grid offsets, truncated at 3 sigma per axis."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    sig = dyn.sigmas(dt)
    axes = []
    for s in sig:
        n = int(math.floor(3.0 * s / spacing + 1e-12))
        axes.append(np.arange(-n, n + 1) * spacing)
    ox, oy, oz = np.meshgrid(*axes, indexing="ij")
    k = np.exp(-ox**2 / (2 * sig[0] ** 2) - oy**2 / (2 * sig[1] ** 2) - oz**2 / (2 * sig[2] ** 2))
    return k / k.sum()


def propagate(b: BeliefGrid, dyn: TargetDynamics, dt: float) -> BeliefGrid:
    """Spread the belief by the target transition kernel.

    Mass that the kernel would carry outside the grid is folded back by
    normalizing each source cell's outgoing weights over in-grid destinations,
    so the target is assumed to stay inside the modeled volume.
    """
    k = transition_kernel(dyn, dt, b.spec.spacing)
    if k.size == 1:
        return b.normalized()
    reach = ndimage.convolve(np.ones(b.spec.dims), k, mode="constant", cval=0.0)
    out = ndimage.convolve(b.values / reach, k, mode="constant", cval=0.0)
    np.maximum(out, 0.0, out=out)
    return BeliefGrid(b.spec, out).normalized()


def _camera_rotation(yaw: float, cam: CameraModel) -> Quaternion:
    return Quaternion.from_euler(yaw, 0.0, 0.0) * cam.mount_orientation


def sensor_footprint(x: Sequence[float], yaw: float, model: SensorModel, spec: GridSpec) -> SensorFootprint:
    """Cells whose centers lie in the level-flight camera frustum at ``x`` heading ``yaw``."""
    cam = model.camera
    x = np.asarray(getattr(x, "vector", x), dtype=float)
    r_max = cam.max_detection_range
    lo = np.floor((x - r_max - np.asarray(spec.corner)) / spec.spacing).astype(int)
    hi = np.ceil((x + r_max - np.asarray(spec.corner)) / spec.spacing).astype(int) + 1
    lo = np.maximum(lo, 0)
    hi = np.minimum(hi, spec.dims)
    if np.any(hi <= lo):
        return SensorFootprint.empty()
    sub = spec.centers()[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
    rel = sub.reshape(-1, 3) - x
    q = _camera_rotation(yaw, cam)
    cam_pts = rotate(q.conjugate(), rel)
    mask = in_frustum_camera(cam_pts, cam)
    if not mask.any():
        return SensorFootprint.empty()
    local = np.nonzero(mask)[0]
    li = np.unravel_index(local, tuple(hi - lo))
    flat = np.ravel_multi_index(tuple(li[a] + lo[a] for a in range(3)), spec.dims)
    conf = model.confidence(np.linalg.norm(rel[local], axis=1))
    keep = conf > 0
    order = np.argsort(flat[keep], kind="stable")
    return SensorFootprint(flat[keep][order].astype(np.intp), conf[keep][order])


def belief_gain(b: BeliefGrid, fp: SensorFootprint) -> float:
    """Detection-weighted belief mass inside the footprint."""
    return _gain(b.values.reshape(-1), fp)


def _gain(flat_values: np.ndarray, fp: SensorFootprint) -> float:
    if len(fp) == 0:
        return 0.0
    return float(np.sum(flat_values[fp.indices] * fp.confidence))


def suppress(flat_values: np.ndarray, fp: SensorFootprint) -> None:
    """In-place look update without renormalization."""
    if len(fp):
        flat_values[fp.indices] *= 1.0 - fp.confidence


def apply_sensor(b: BeliefGrid, fp: SensorFootprint) -> BeliefGrid:
    """Scale footprint cells by their miss probability, then renormalize."""
    if len(fp) == 0:
        return b.copy()
    v = b.values.reshape(-1).copy()
    suppress(v, fp)
    return BeliefGrid(b.spec, v.reshape(b.spec.dims)).normalized()


def max_belief_point(b: BeliefGrid) -> Index:
    """Argmax cell; numpy's first-occurrence rule breaks ties by lowest flat index."""
    return b.spec.unflat(int(np.argmax(b.values.reshape(-1))))


# 26-connected moves plus staying put, in lexicographic order
NEIGHBOR_OFFSETS: Tuple[Index, ...] = tuple(
    (dx, dy, dz) for dx in (-1, 0, 1) for dy in (-1, 0, 1) for dz in (-1, 0, 1))


def step_yaw(prev: Index, nxt: Index, prev_yaw: float) -> float:
    """Heading implied by a move; vertical moves and stays keep the previous heading."""
    dx, dy = nxt[0] - prev[0], nxt[1] - prev[1]
    if dx == 0 and dy == 0:
        return prev_yaw
    return compass_bearing((dx, dy))


class FootprintCache:
    """Memoized footprints at grid points for a fixed grid and sensor model."""

    def __init__(self, spec: GridSpec, model: SensorModel):
        self.spec = spec
        self.model = model
        self._cache: Dict[Tuple[Index, float], SensorFootprint] = {}

    def __call__(self, idx: Index, yaw: float) -> SensorFootprint:
        key = (idx, round(yaw % 360.0, 9))
        fp = self._cache.get(key)
        if fp is None:
            fp = sensor_footprint(self.spec.cell_center(idx), key[1], self.model, self.spec)
            self._cache[key] = fp
        return fp


def plan_rhc(b: BeliefGrid, x0: Index, h: int, gamma: float, model: SensorModel,
             yaw0: float = 0.0, threshold: float = GAIN_THRESHOLD,
             max_frontier: Optional[int] = None,
             footprints: Optional[FootprintCache] = None) -> Optional[PlannedPath]:
    """Best discounted-gain path of up to ``h`` neighbor moves from ``x0``.

    Level by level, every surviving path is extended by each in-grid
    neighbor.  The step-``t`` gain is ``gamma**t`` times the belief captured
    by the footprint at the new waypoint, evaluated on the belief after the
    path's earlier footprints have been applied (without renormalizing, so a
    path's total gain is its probability of seeing the target).  Extensions
    whose cumulative gain does not exceed ``threshold`` are pruned.

    The result maximizes gain; ties go to the shorter path, then to the
    lexicographically smaller sequence of neighbor moves.  None means no path
    survived pruning and the caller should fall back to the belief maximum.
    ``max_frontier`` optionally keeps only the highest-gain paths per level.
    """
    if h < 1:
        raise ValueError("horizon must be >= 1")
    if not 0.0 < gamma <= 1.0:
        raise ValueError("discount must lie in (0, 1]")
    spec = b.spec
    if not spec.contains(x0):
        raise ValueError(f"start {x0} is outside the grid")
    fps = footprints if footprints is not None and footprints.spec == spec else FootprintCache(spec, model)
    work = b.values.reshape(-1).copy()

    # frontier entries: (moves, waypoints, yaws, gain)
    frontier = [((), (x0,), (yaw0,), 0.0)]
    best = None  # (gain, depth, moves, waypoints)
    for t in range(1, h + 1):
        disc = gamma**t
        nxt = []
        for moves, wps, yaws, g in frontier:
            saved = []
            for i in range(1, len(wps)):
                fp = fps(wps[i], yaws[i])
                saved.append((fp, work[fp.indices].copy()))
                suppress(work, fp)
            cur = wps[-1]
            for m, off in enumerate(NEIGHBOR_OFFSETS):
                cand = (cur[0] + off[0], cur[1] + off[1], cur[2] + off[2])
                if not spec.contains(cand):
                    continue
                yaw = step_yaw(cur, cand, yaws[-1])
                g_new = g + disc * _gain(work, fps(cand, yaw))
                if g_new > threshold:
                    entry = (moves + (m,), wps + (cand,), yaws + (yaw,), g_new)
                    nxt.append(entry)
                    key = (g_new, -t)
                    if best is None or key > (best[0], -best[1]) or (
                            key == (best[0], -best[1]) and entry[0] < best[2]):
                        best = (g_new, t, entry[0], entry[1])
            for fp, vals in reversed(saved):
                work[fp.indices] = vals
        if max_frontier is not None and len(nxt) > max_frontier:
            order = sorted(range(len(nxt)), key=lambda i: -nxt[i][3])[:max_frontier]
            nxt = [nxt[i] for i in sorted(order)]
        frontier = nxt
        if not frontier:
            break
    if best is None:
        return None
    return PlannedPath(list(best[3]), best[0], h, gamma)
