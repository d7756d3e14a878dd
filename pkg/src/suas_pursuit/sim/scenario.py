"""Scenario files: YAML documents validated against a pydantic schema.

Unknown keys are rejected so typos surface as errors.  Validation collects
every problem at once; :class:`ScenarioError` carries them as
``"dotted.field.path: message"`` strings.
"""

from __future__ import annotations

from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

Vec3 = Tuple[float, float, float]
Prob = float


class ScenarioError(ValueError):
    def __init__(self, errors: List[str], source: str = "scenario"):
        self.errors = list(errors)
        super().__init__(f"{source}: " + "; ".join(self.errors))


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class OriginConfig(_Model):
    latitude: float = Field(ge=-89.9, le=89.9)
    longitude: float = Field(ge=-180.0, le=180.0)
    altitude: float = 0.0


class CameraConfig(_Model):
    horizontal_fov: float = Field(90.0, gt=0, lt=180)
    vertical_fov: float = Field(60.0, gt=0, lt=180)
    width_px: int = Field(3840, ge=1)
    height_px: int = Field(2160, ge=1)
    tilt_deg: float = Field(40.0, ge=-90, le=90)
    max_detection_range: float = Field(100.0, gt=0)
    stabilized: bool = True


class FollowGains(_Model):
    yaw: Tuple[float, float] = (0.25, 0.002)
    pitch: Tuple[float, float, float] = (0.4, 0.01, 0.2)
    climb: Tuple[float, float, float] = (0.6, 0.01, 0.02)
    slant_range: float = Field(40.0, gt=0)
    elevation: float = Field(40.0, gt=0, lt=90)
    median_window: int = Field(5, ge=1)
    stale_after: float = Field(2.0, gt=0)


class PlantParams(_Model):
    max_speed: float = Field(15.0, gt=0)
    max_climb_rate: float = Field(3.0, gt=0)
    pitch_to_accel_gain: float = Field(0.5, gt=0)
    terminal_speed_at_20deg: float = Field(15.0, gt=0)
    command_lag: float = Field(0.3, ge=0)


class Segment(_Model):
    shape: Literal["line", "hold", "circle", "rectangle"]
    to: Optional[Vec3] = None
    center: Optional[Tuple[float, float]] = None
    speed: Optional[float] = Field(None, gt=0)
    duration: Optional[float] = Field(None, ge=0)
    turns: Optional[float] = Field(None, gt=0)
    direction: Literal["cw", "ccw"] = "ccw"
    climb_rate: float = 0.0
    width: Optional[float] = None
    height: Optional[float] = None
    pause: float = Field(0.0, ge=0)
    laps: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _required(self):
        need = {"line": ("to", "speed"), "hold": ("duration",), "circle": ("center", "speed"),
                "rectangle": ("width", "height", "speed")}[self.shape]
        missing = [n for n in need if getattr(self, n) is None]
        if missing:
            raise ValueError(f"{self.shape} segment needs {', '.join(missing)}")
        return self

    def as_dict(self) -> dict:
        return {k: v for k, v in self.model_dump().items() if v is not None}


class ScriptConfig(_Model):
    start: Vec3
    segments: List[Segment] = []
    loop: bool = False


class ChaseConfig(_Model):
    start: Vec3 = (0.0, 0.0, 0.0)
    heading: float = 0.0
    script: Optional[ScriptConfig] = None  # kinematic chase instead of the plant


class TargetConfig(ScriptConfig):
    size: float = Field(0.35, gt=0)


class RadarConfig(_Model):
    enabled: bool = True
    position: Vec3 = (0.0, 0.0, 0.0)
    yaw: float = 0.0
    pitch: float = 0.0
    roll: float = 0.0
    fov_az: float = Field(120.0, gt=0, le=360)
    fov_el: float = Field(80.0, gt=0, le=180)
    max_range: float = Field(750.0, gt=0)
    min_altitude: float = 2.0
    rate_hz: float = Field(5.0, gt=0)
    noise_sd: Vec3 = (1.0, 0.3, 0.3)
    drop_prob_per_s: Prob = Field(0.0, ge=0, le=1)
    swap_prob_on_proximity: Prob = Field(0.0, ge=0, le=1)
    proximity_m: float = Field(15.0, gt=0)
    duplicate_prob_per_s: Prob = Field(0.0, ge=0, le=1)
    gps_noise_sd: float = Field(0.5, ge=0)


class DetectorConfig(_Model):
    enabled: bool = True
    min_pixels: float = Field(10.0, ge=0)
    detect_prob: Prob = Field(0.9, ge=0, le=1)
    pixel_noise_sd: float = Field(2.0, ge=0)


class CorrelatorConfig(_Model):
    epsilon: float = Field(10.0, gt=0)
    window_length: float = Field(2.0, gt=0)
    validate_after: float = Field(2.0, ge=0)
    cue_timeout: float = Field(2.0, gt=0)


class MissionConfig(_Model):
    initial_state: Literal["OnGround", "VisionFollow"] = "OnGround"
    takeoff_altitude: float = Field(20.0, gt=0)
    vision_debounce: int = Field(3, ge=1)
    vision_timeout: float = Field(2.0, gt=0)
    cruise_altitude: Optional[float] = Field(None, gt=0)


class GridConfig(_Model):
    half_extent: float = Field(200.0, gt=0)
    height: float = Field(60.0, ge=0)
    spacing: float = Field(20.0, gt=0)
    floor: float = 0.0


class SearchConfig(_Model):
    planner: Literal["rhc", "max_belief"] = "rhc"
    horizon: int = Field(3, ge=1, le=6)
    discount: float = Field(0.9, gt=0, le=1)
    belief_dt: float = Field(1.0, gt=0)
    v_h: float = Field(10.0, gt=0)
    v_v: float = Field(5.0, gt=0)
    full_confidence_range: float = Field(60.0, gt=0)
    max_frontier: Optional[int] = Field(None, ge=1)
    grid: GridConfig = GridConfig()
    radar_sigma: Vec3 = (5.0, 2.0, 2.0)


class ScheduledEvent(_Model):
    t: float = Field(ge=0)
    action: Literal["radar_off", "radar_on", "detector_off", "detector_on", "abort"]


class OutputConfig(_Model):
    belief_snapshot_interval: float = Field(10.0, gt=0)


class Scenario(_Model):
    name: str
    seed: int = 0
    duration: float = Field(gt=0)
    physics_dt: float = Field(0.05, gt=0)
    control_dt: float = Field(0.2, gt=0)
    origin: OriginConfig
    camera: CameraConfig
    follow: FollowGains = FollowGains()
    plant: PlantParams = PlantParams()
    chase: ChaseConfig = ChaseConfig()
    target: TargetConfig
    radar: RadarConfig = RadarConfig()
    detector: DetectorConfig = DetectorConfig()
    correlator: CorrelatorConfig = CorrelatorConfig()
    mission: MissionConfig = MissionConfig()
    search: SearchConfig = SearchConfig()
    events: List[ScheduledEvent] = []
    output: OutputConfig = OutputConfig()

    @field_validator("events")
    @classmethod
    def _sorted(cls, v):
        return sorted(v, key=lambda e: e.t)

    @model_validator(mode="after")
    def _cadence(self):
        ratio = self.control_dt / self.physics_dt
        if abs(ratio - round(ratio)) > 1e-9 or ratio < 1:
            raise ValueError("control_dt must be a whole multiple of physics_dt")
        return self


def _format(exc: ValidationError) -> List[str]:
    out = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        out.append(f"{loc}: {err['msg']}")
    return out


def parse_scenario(data: Union[dict, None], source: str = "scenario") -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError(["<root>: expected a mapping of scenario fields"], source)
    try:
        return Scenario.model_validate(data)
    except ValidationError as exc:
        raise ScenarioError(_format(exc), source) from None


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ScenarioError([f"<file>: not valid YAML ({exc})"], str(path)) from None
    return parse_scenario(data, str(path))


def bundled_scenarios() -> List[Path]:
    root = Path(__file__).resolve().parent.parent / "data" / "scenarios"
    return sorted(root.glob("*.scenario"))


def bundled_scenario(name: str) -> Path:
    for p in bundled_scenarios():
        if p.stem == name:
            return p
    raise FileNotFoundError(f"no bundled scenario named {name!r}")
