"""Fixed-step scenario loop.

Every controller tick runs the modules in a fixed order: target script,
plant (physics sub-steps under a zero-order hold on the last command),
radar, correlator, mission executive, active controller, detector, belief
grid.  Each component draws from its own generator seeded at a fixed
offset from the scenario seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..calibration import RadarPose
from ..correlator import CorrelatorState, GpsTrack, RadarTrack, TrackCorrelator, active_tracks
from ..filters import QuaternionAlphaBeta
from ..follow import FollowCommand, FollowConfig, FollowController, ChaseGeometry, relative_target_state
from ..geo import (CameraModel, EnuPoint, GeodeticPoint, OwnshipPose, Quaternion, compass_bearing,
                   enu_to_geodetic, in_camera_view, target_enu_from_bbox, wrap_degrees)
from ..mission import (Abort, AltitudeReached, Controller, CueLost, CueUpdated, MissionExecutive, MissionState,
                       State, TrackValidated, VisionAcquired, VisionLost)
from ..search import (BeliefGrid, FootprintCache, GridSpec, SensorModel, TargetDynamics, apply_sensor, belief_gain,
                      init_belief, max_belief_point, plan_rhc, propagate, sensor_footprint)
from ..telemetry import AUTONOMOUS_STATES, MetricsReport, TelemetryLog, belief_to_text, compute_metrics, events_to_jsonl
from .detector import SyntheticDetector
from .guidance import GuidanceConfig, goto_command, standoff_point
from .plant import ChasePlant, PlantConfig
from .radar import SyntheticRadar
from .scenario import Scenario
from .targets import TargetScript

SEED_OFFSETS = {"radar": 101, "detector": 202, "gps": 303, "imu": 404}
SCRIPTED = "Scripted"


@dataclass
class RunResult:
    scenario: Scenario
    seed: int
    telemetry: TelemetryLog
    events: List[dict]
    beliefs: List[Tuple[float, BeliefGrid]] = field(default_factory=list)
    radar_events: List[dict] = field(default_factory=list)
    wall_plans: int = 0

    @property
    def metrics(self) -> MetricsReport:
        return compute_metrics(self.telemetry)

    def write(self, out_dir) -> Dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"telemetry": out / "telemetry.csv", "events": out / "events.jsonl",
                 "metrics": out / "metrics.json"}
        self.telemetry.write(paths["telemetry"])
        paths["events"].write_text(events_to_jsonl(self.events))
        paths["metrics"].write_text(self.metrics.to_json() + "\n")
        if self.beliefs:
            bdir = out / "belief"
            bdir.mkdir(exist_ok=True)
            for k, (t, b) in enumerate(self.beliefs):
                (bdir / f"belief_{k:04d}.txt").write_text(
                    belief_to_text(t, b.values, b.spec.corner, b.spec.spacing))
            paths["belief"] = bdir
        return paths


def _clip_into(spec: GridSpec, p: np.ndarray) -> np.ndarray:
    lo = np.asarray(spec.corner, dtype=float)
    hi = lo + spec.spacing * (np.asarray(spec.dims) - 1)
    return np.minimum(np.maximum(p, lo), hi)


class ScenarioRunner:
    def __init__(self, scenario: Scenario, seed: Optional[int] = None):
        self.scn = s = scenario
        self.seed = s.seed if seed is None else int(seed)
        self.origin = GeodeticPoint(s.origin.latitude, s.origin.longitude, s.origin.altitude)
        c = s.camera
        self.cam = CameraModel.tilted(c.tilt_deg, horizontal_fov=c.horizontal_fov, vertical_fov=c.vertical_fov,
                                      width_px=c.width_px, height_px=c.height_px,
                                      max_detection_range=c.max_detection_range)
        self.target = TargetScript(s.target.start, [g.as_dict() for g in s.target.segments], s.target.loop)
        self.chase_script = None
        if s.chase.script is not None:
            cs = s.chase.script
            self.chase_script = TargetScript(cs.start, [g.as_dict() for g in cs.segments], cs.loop)
        self.plant_cfg = PlantConfig(max_speed=s.plant.max_speed, max_climb_rate=s.plant.max_climb_rate,
                                     pitch_to_accel_gain=s.plant.pitch_to_accel_gain,
                                     terminal_speed_at_20deg=s.plant.terminal_speed_at_20deg,
                                     command_lag=s.plant.command_lag)
        self.plant = ChasePlant(np.array(s.chase.start, dtype=float), heading=s.chase.heading % 360.0,
                                config=self.plant_cfg)
        r = s.radar
        radar_geo = enu_to_geodetic(EnuPoint.from_vector(r.position, self.origin))
        self.radar_pos = np.asarray(r.position, dtype=float)
        self.radar = SyntheticRadar(
            RadarPose(radar_geo, r.yaw, r.pitch, r.roll), self.origin, fov_az=r.fov_az, fov_el=r.fov_el,
            max_range=r.max_range, min_altitude=r.min_altitude, rate_hz=r.rate_hz, noise_sd=tuple(r.noise_sd),
            drop_prob_per_s=r.drop_prob_per_s, swap_prob_on_proximity=r.swap_prob_on_proximity,
            proximity_m=r.proximity_m, duplicate_prob_per_s=r.duplicate_prob_per_s,
            rng_seed=self.seed + SEED_OFFSETS["radar"], enabled=r.enabled)
        d = s.detector
        self.detector = SyntheticDetector(self.cam, d.min_pixels, d.detect_prob, d.pixel_noise_sd, s.target.size,
                                          rng_seed=self.seed + SEED_OFFSETS["detector"], enabled=d.enabled)
        self.gps_rng = np.random.default_rng(self.seed + SEED_OFFSETS["gps"])
        self.imu_rng = np.random.default_rng(self.seed + SEED_OFFSETS["imu"])
        self.correlator = TrackCorrelator(CorrelatorState(epsilon=s.correlator.epsilon,
                                                          window_length=s.correlator.window_length))
        self.tracks: Dict[int, RadarTrack] = {}
        self.track_owner: Dict[int, str] = {}
        self.gps = GpsTrack(self.origin)
        geom = ChaseGeometry(s.follow.slant_range, s.follow.elevation)
        self.geometry = geom
        self.follow = FollowController(FollowConfig(
            yaw_gains=tuple(s.follow.yaw), pitch_gains=tuple(s.follow.pitch), climb_gains=tuple(s.follow.climb),
            ground_range_setpoint=geom.ground_range_setpoint, relative_height_setpoint=geom.relative_height_setpoint,
            median_window=s.follow.median_window, stale_after=s.follow.stale_after, nominal_period=s.control_dt))
        self.guidance = GuidanceConfig()
        init = State.VISION_FOLLOW if s.mission.initial_state == "VisionFollow" else State.ON_GROUND
        self.mission = MissionExecutive(MissionState(init, 0.0))
        self.attitude = QuaternionAlphaBeta(alpha=0.5, beta=0.05)
        sc = s.search
        self.dynamics = TargetDynamics(sc.v_h, sc.v_v)
        self.sensor_model = SensorModel(self.cam, sc.full_confidence_range)

        self.events: List[dict] = []
        self.beliefs: List[Tuple[float, BeliefGrid]] = []
        self.cmd = FollowCommand.hover_command()
        self.belief: Optional[BeliefGrid] = None
        self.footprints: Optional[FootprintCache] = None
        self.next_belief_t = math.inf
        self.next_snapshot_t = math.inf
        self.waypoint: Optional[np.ndarray] = None
        self.waypoint_set_at = -math.inf
        self.belief_gain_now: Optional[float] = None
        self.cue_track: Optional[int] = None
        self.cue_pos: Optional[np.ndarray] = None
        self.cue_time = -math.inf
        self.cue_from_radar = True
        self.last_known: Optional[np.ndarray] = None
        self.validated = False
        self.det_streak = 0
        self.last_det_t = -math.inf
        self.last_bbox = None
        self.launch = np.array(s.chase.start, dtype=float)
        if init is State.VISION_FOLLOW:
            self.last_det_t = 0.0
            self.last_known = np.asarray(s.target.start, dtype=float)
            self.cue_from_radar = False
        self.next_radar_t = 0.0
        self.plans = 0
        self._max_cell = None
        self._search_focus = None
        self._seq = 0
        self._done_sched = 0

    # -- helpers ---------------------------------------------------------

    def _event(self, t: float, source: str, kind: str, **payload) -> None:
        rec = {"t": round(t, 9), "seq": self._seq, "source": source, "kind": kind}
        rec.update(payload)
        self.events.append(json.loads(json.dumps(rec)))  # plain JSON types only
        self._seq += 1

    def _chase_state(self, t: float) -> Tuple[np.ndarray, np.ndarray, float]:
        if self.chase_script is not None:
            v = self.chase_script.velocity(t)
            pos = self.chase_script.position(t)
            heading = compass_bearing(v) if math.hypot(v[0], v[1]) > 1e-6 else self.plant.heading
            self.plant.position, self.plant.velocity, self.plant.heading = pos, v, heading
        return self.plant.position.copy(), self.plant.velocity.copy(), self.plant.heading

    def _pose(self, t: float) -> OwnshipPose:
        return self.plant.pose(self.origin, t, camera_stabilized=self.scn.camera.stabilized)

    def _handle(self, t: float, event) -> None:
        change = self.mission.handle(event, t)
        if change is not None:
            old, new = change
            self._event(t, "mission", "transition", **{"from": str(old), "to": str(new),
                                                        "event": type(event).__name__})
            self._on_enter(t, new)

    def _on_enter(self, t: float, state: State) -> None:
        self.waypoint = None
        if state is State.VISION_FOLLOW:
            self.follow.reset()
            self.follow.last_target_time = None
        if state is State.SEARCH:
            self._init_belief(t)

    # -- modules ---------------------------------------------------------

    def _scheduled(self, t: float) -> None:
        evs = self.scn.events
        while self._done_sched < len(evs) and evs[self._done_sched].t <= t + 1e-9:
            e = evs[self._done_sched]
            self._done_sched += 1
            self._event(t, "schedule", e.action)
            if e.action == "radar_off":
                self.radar.enabled = False
            elif e.action == "radar_on":
                self.radar.enabled = True
            elif e.action == "detector_off":
                self.detector.enabled = False
            elif e.action == "detector_on":
                self.detector.enabled = True
            elif e.action == "abort":
                self._handle(t, Abort())

    def _radar(self, t: float, chase: np.ndarray, target: np.ndarray) -> None:
        if t + 1e-9 < self.next_radar_t:
            return
        self.next_radar_t += self.radar.period
        samples = self.radar.step([chase, target], t, ["chase", "target"])
        for s in samples:
            tr = self.tracks.get(s.track_id)
            if tr is None:
                tr = self.tracks[s.track_id] = RadarTrack(s.track_id, self.origin)
            tr.append(t, s.enu)
            self.track_owner[s.track_id] = s.owner
        for et, kind, payload in self.radar.events:
            self._event(et, "radar", kind, **payload)
        self.radar.events.clear()

    def _correlate(self, t: float, chase: np.ndarray) -> None:
        noise = self.gps_rng.normal(0.0, self.scn.radar.gps_noise_sd, 3)
        self.gps.append(t, chase + noise)
        before = self.correlator.associated_id
        self.correlator.update(list(self.tracks.values()), self.gps, t)
        if self.correlator.associated_id != before:
            self._event(t, "correlator", "associate", track_id=self.correlator.associated_id)

    def _cue(self, t: float, chase: np.ndarray) -> None:
        cfg = self.scn.correlator
        cands = self.correlator.unassociated(self.tracks.values(), t)
        if not self.plant.on_ground:
            # never cue on something sitting on top of the ownship
            cands = [tr for tr in cands if np.linalg.norm(tr.positions[-1] - chase) > 2 * cfg.epsilon]
        chosen = None
        if self.cue_track is not None:
            chosen = next((tr for tr in cands if tr.track_id == self.cue_track), None)
        if chosen is None and cands:
            if self.cue_pos is not None:
                chosen = min(cands, key=lambda tr: (float(np.linalg.norm(tr.positions[-1] - self.cue_pos)),
                                                    tr.track_id))
            else:
                chosen = min(cands, key=lambda tr: (tr.first_time, tr.track_id))
        if chosen is not None:
            if chosen.track_id != self.cue_track:
                self._event(t, "cue", "cue_track", track_id=chosen.track_id)
            self.cue_track = chosen.track_id
            self.cue_pos = chosen.positions[-1].copy()
            self.cue_time = t
            self.cue_from_radar = True
            self.last_known = self.cue_pos
            if not self.validated and t - chosen.first_time >= cfg.validate_after:
                self.validated = True
                self._event(t, "cue", "track_validated", track_id=chosen.track_id)
                if self.mission.kind is State.ON_GROUND:
                    self._handle(t, TrackValidated())
            self._handle(t, CueUpdated(tuple(float(x) for x in self.cue_pos)))
        elif self.mission.has_live_cue and t - self.cue_time > cfg.cue_timeout:
            self.cue_track = None
            self._event(t, "cue", "cue_lost")
            self._handle(t, CueLost())

    def _mission(self, t: float, chase: np.ndarray) -> None:
        m = self.scn.mission
        if self.mission.kind is State.TAKEOFF_TO_ALTITUDE and chase[2] >= m.takeoff_altitude - 0.5:
            self._handle(t, AltitudeReached(m.takeoff_altitude))
        if self.mission.kind is not State.VISION_FOLLOW and self.det_streak >= m.vision_debounce:
            self._handle(t, VisionAcquired())
        if self.mission.kind is State.VISION_FOLLOW and t - self.last_det_t > m.vision_timeout:
            self._handle(t, VisionLost())

    def _goto(self, chase, velocity, heading, goal, face=None) -> FollowCommand:
        return goto_command(chase, velocity, heading, goal, self.plant_cfg, self.guidance, face)

    def _control(self, t: float, chase: np.ndarray, velocity: np.ndarray, heading: float,
                 target: np.ndarray) -> FollowCommand:
        ctl = self.mission.controller
        m = self.scn.mission
        if ctl is Controller.NONE:
            return FollowCommand.hover_command()
        if ctl is Controller.CLIMB_TO_ALTITUDE:
            goal = np.array([chase[0], chase[1], m.takeoff_altitude])
            self.waypoint = goal
            cmd = self._goto(chase, velocity, heading, goal, face=self.cue_pos)
            return FollowCommand(cmd.yaw_rate, 0.0, cmd.climb_rate)
        if ctl is Controller.WAYPOINT_TO_CUE:
            g = self.geometry
            goal = standoff_point(chase, self.cue_pos, g.ground_range_setpoint, g.relative_height_setpoint)
            if m.cruise_altitude is not None:
                goal[2] = max(goal[2], m.cruise_altitude)
            self.waypoint = goal
            return self._goto(chase, velocity, heading, goal, face=self.cue_pos)
        if ctl is Controller.RHC_SEARCH:
            return self._search_control(t, chase, velocity, heading)
        if ctl is Controller.PID_FOLLOW:
            return self._follow_control(t, chase, target)
        # return to launch
        home = np.array([self.launch[0], self.launch[1], max(chase[2], self.guidance.min_altitude)])
        self.waypoint = home
        if math.hypot(*(home[:2] - chase[:2])) > 3.0:
            return self._goto(chase, velocity, heading, home)
        cmd = self._goto(chase, velocity, heading, home)
        return FollowCommand(cmd.yaw_rate, cmd.pitch, -1.0 if chase[2] > 0 else 0.0)

    def _follow_control(self, t: float, chase: np.ndarray, target: np.ndarray) -> FollowCommand:
        b = self.last_bbox
        if b is not None and self.last_det_t == self._prev_t:
            gps_noise = self.scn.radar.gps_noise_sd
            chase_gps = chase + self.gps_rng.normal(0.0, gps_noise, 3)
            target_gps = target + self.gps_rng.normal(0.0, gps_noise, 3)
            att = self._attitude_estimate(self._prev_t)
            pose = OwnshipPose(EnuPoint.from_vector(chase_gps, self.origin), att, self._prev_t)
            rng = float(np.linalg.norm(target_gps - chase_gps))
            est = target_enu_from_bbox(b, self.cam, pose, max(rng, 1e-3)).vector
            yaw_est = att.to_euler()[0]
            self.last_known = est
            rel = relative_target_state(chase_gps, yaw_est, est, self._prev_t)
            return self.follow.step(rel, t)
        guard = self.follow.staleness_guard(t)
        if guard is not None:
            return guard
        return self.cmd

    def _attitude_estimate(self, t: float) -> Quaternion:
        truth = self._pose(t).orientation
        jitter = Quaternion.from_rotation_vector(np.radians(self.imu_rng.normal(0.0, 0.2, 3)))
        return self.attitude.update((truth * jitter).normalized(), t)

    def _search_control(self, t: float, chase, velocity, heading) -> FollowCommand:
        if self.belief is None:
            self._init_belief(t)
        spec = self.belief.spec
        sc = self.scn.search
        g = self.geometry
        if sc.planner == "rhc":
            arrived = False
            if self.waypoint is not None:
                d = self.waypoint - chase
                arrived = math.hypot(d[0], d[1]) < spec.spacing / 2 and abs(d[2]) < spec.spacing / 2
            stale = t - self.waypoint_set_at > 4 * spec.spacing / self.guidance.cruise_speed + 5.0
            if self.waypoint is None or arrived or stale:
                x0 = spec.nearest_index(_clip_into(spec, chase))
                path = plan_rhc(self.belief, x0, sc.horizon, sc.discount, self.sensor_model, heading,
                                max_frontier=sc.max_frontier, footprints=self.footprints)
                self.plans += 1
                if path is None:
                    # nothing worth seeing within the horizon: cue to the belief maximum
                    cell = max_belief_point(self.belief)
                    self._search_focus = spec.cell_center(cell)
                    self.waypoint = standoff_point(chase, self._search_focus, g.ground_range_setpoint,
                                                   g.relative_height_setpoint)
                    self._event(t, "planner", "fallback_max_belief", cell=list(cell))
                else:
                    cell = path.first_step
                    self._search_focus = None
                    self.waypoint = spec.cell_center(cell)
                    self._event(t, "planner", "rhc_waypoint", cell=list(cell), gain=path.gain,
                                path=[list(w) for w in path.waypoints])
                self.waypoint_set_at = t
            return self._goto(chase, velocity, heading, self.waypoint, face=self._search_focus)
        # baseline: cue to the belief maximum the same way as to a radar cue
        if self._max_cell is None or self._belief_updated:
            cell = max_belief_point(self.belief)
            if cell != self._max_cell:
                self._event(t, "planner", "max_belief_waypoint", cell=list(cell))
            self._max_cell = cell
        focus = spec.cell_center(self._max_cell)
        self.waypoint = standoff_point(chase, focus, g.ground_range_setpoint, g.relative_height_setpoint)
        return self._goto(chase, velocity, heading, self.waypoint, face=focus)

    def _init_belief(self, t: float) -> None:
        sc = self.scn.search
        center = self.last_known if self.last_known is not None else self.plant.position
        g = sc.grid
        spec = GridSpec.centered((center[0], center[1], g.floor), g.half_extent, g.height, g.spacing, self.origin)
        det = _clip_into(spec, np.asarray(center, dtype=float))
        sensor = self.radar_pos if self.cue_from_radar else self.plant.position
        if np.linalg.norm(det - sensor) < 1e-6:
            sensor = det - np.array([0.0, 1.0, 0.0])
        self.belief = init_belief(det, *sc.radar_sigma, spec, sensor)
        self.footprints = FootprintCache(spec, self.sensor_model)
        self.next_belief_t = t + sc.belief_dt
        self.next_snapshot_t = t
        self._event(t, "belief", "init", center=[float(x) for x in det], dims=list(spec.dims))
        self._snapshot(t)

    def _snapshot(self, t: float) -> None:
        if t + 1e-9 >= self.next_snapshot_t:
            self.beliefs.append((t, self.belief.copy()))
            self.next_snapshot_t = t + self.scn.output.belief_snapshot_interval

    def _update_belief(self, t: float, chase: np.ndarray, heading: float) -> None:
        self._belief_updated = False
        self.belief_gain_now = None
        if self.belief is None or self.mission.kind is not State.SEARCH or t + 1e-9 < self.next_belief_t:
            return
        sc = self.scn.search
        self.belief = propagate(self.belief, self.dynamics, sc.belief_dt)
        fp = sensor_footprint(chase, heading, self.sensor_model, self.belief.spec)
        self.belief_gain_now = belief_gain(self.belief, fp)
        self.belief = apply_sensor(self.belief, fp)
        self.next_belief_t += sc.belief_dt
        self._belief_updated = True
        self._snapshot(t)

    # -- main loop -------------------------------------------------------

    def run(self) -> RunResult:
        s = self.scn
        n_sub = int(round(s.control_dt / s.physics_dt))
        n_ticks = int(math.floor(s.duration / s.control_dt + 1e-9)) + 1
        log = TelemetryLog()
        scripted = self.chase_script is not None
        self._prev_t = -math.inf
        self._belief_updated = False
        for k in range(n_ticks):
            t = k * s.control_dt
            self._scheduled(t)
            target = self.target.position(t)
            if k > 0 and not scripted:
                for _ in range(n_sub):
                    self.plant.step(self.cmd, s.physics_dt)
            chase, velocity, heading = self._chase_state(t)

            self._radar(t, chase, target)
            self._correlate(t, chase)
            if scripted:
                self.cmd = FollowCommand.hover_command()
            else:
                self._cue(t, chase)
                self._mission(t, chase)
                self.cmd = self._control(t, chase, velocity, heading, target)

            pose = self._pose(t)
            bbox = None if scripted else self.detector.step(pose, EnuPoint.from_vector(target, self.origin), t)
            if bbox is not None:
                self.det_streak += 1
                self.last_det_t = t
            else:
                self.det_streak = 0
            self.last_bbox = bbox
            self._prev_t = t
            if not scripted:
                self._update_belief(t, chase, heading)

            self._log_row(log, t, chase, heading, target, pose, bbox, scripted)
        return RunResult(s, self.seed, log, self.events, self.beliefs, wall_plans=self.plans)

    def _log_row(self, log, t, chase, heading, target, pose, bbox, scripted) -> None:
        rel = target - chase
        ground = math.hypot(rel[0], rel[1])
        assoc = self.correlator.associated_id
        live = {tr.track_id for tr in active_tracks(self.tracks.values(), t, self.correlator.state.stale_after)}
        if assoc not in live:
            assoc = None
        state = SCRIPTED if scripted else str(self.mission.kind)
        wp = self.waypoint
        log.append(
            t=t, mission_state=state, autonomous=state in AUTONOMOUS_STATES,
            chase_e=float(chase[0]), chase_n=float(chase[1]), chase_u=float(chase[2]), chase_heading=float(heading),
            target_e=float(target[0]), target_n=float(target[1]), target_u=float(target[2]),
            cmd_yaw_rate=self.cmd.yaw_rate, cmd_pitch=self.cmd.pitch, cmd_climb_rate=self.cmd.climb_rate,
            cmd_hover=self.cmd.hover,
            rel_azimuth=float(wrap_degrees(compass_bearing(rel) - heading)) if ground > 0 else 0.0,
            rel_elevation=math.degrees(math.atan2(-rel[2], ground)),
            rel_range=float(np.linalg.norm(rel)), rel_ground_range=ground,
            target_in_fov=in_camera_view(EnuPoint.from_vector(target, self.origin), self.cam, pose),
            detected=bbox is not None,
            det_u=None if bbox is None else bbox.center_x_px, det_v=None if bbox is None else bbox.center_y_px,
            det_w=None if bbox is None else bbox.width_px, det_h=None if bbox is None else bbox.height_px,
            radar_tracks=len(live), associated_id=assoc,
            associated_owner=None if assoc is None else self.track_owner.get(assoc),
            belief_gain=self.belief_gain_now,
            waypoint_e=None if wp is None else float(wp[0]), waypoint_n=None if wp is None else float(wp[1]),
            waypoint_u=None if wp is None else float(wp[2]),
        )


def run_scenario(scenario: Scenario, seed: Optional[int] = None) -> RunResult:
    return ScenarioRunner(scenario, seed).run()
