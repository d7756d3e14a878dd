"""Mission executive: the pursuit state machine.

States run from waiting on the ground, through takeoff, flyout to the radar
cue or search around the last known position, to vision-based following.
``transition`` is total: any event not listed for a state leaves the state
unchanged (and is logged).  Abort sends every airborne state to
return-to-launch, a terminal state.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

log = logging.getLogger(__name__)


class State(enum.Enum):
    ON_GROUND = "OnGround"
    TAKEOFF_TO_ALTITUDE = "TakeoffToAltitude"
    FLY_TO_CUE = "FlyToCue"
    SEARCH = "Search"
    VISION_FOLLOW = "VisionFollow"
    RETURN_TO_LAUNCH = "ReturnToLaunch"

    def __str__(self):
        return self.value


AIRBORNE = frozenset({State.TAKEOFF_TO_ALTITUDE, State.FLY_TO_CUE, State.SEARCH, State.VISION_FOLLOW})


@dataclass(frozen=True)
class MissionState:
    kind: State = State.ON_GROUND
    entered_at: float = 0.0


# events


@dataclass(frozen=True)
class TrackValidated:
    pass


@dataclass(frozen=True)
class AltitudeReached:
    target_alt: float


@dataclass(frozen=True)
class CueUpdated:
    position: Tuple[float, float, float]


@dataclass(frozen=True)
class CueLost:
    pass


@dataclass(frozen=True)
class VisionAcquired:
    pass


@dataclass(frozen=True)
class VisionLost:
    pass


@dataclass(frozen=True)
class Abort:
    pass


MissionEvent = Union[TrackValidated, AltitudeReached, CueUpdated, CueLost, VisionAcquired, VisionLost, Abort]


@dataclass(frozen=True)
class MissionContext:
    now: float = 0.0
    has_live_cue: bool = False


def _next(kind: State, event, ctx: MissionContext) -> Optional[State]:
    if isinstance(event, Abort):
        if kind in AIRBORNE:
            return State.RETURN_TO_LAUNCH
        return kind
    if kind is State.ON_GROUND:
        if isinstance(event, TrackValidated):
            return State.TAKEOFF_TO_ALTITUDE
        if isinstance(event, (CueUpdated, CueLost)):
            return kind
    elif kind is State.TAKEOFF_TO_ALTITUDE:
        if isinstance(event, AltitudeReached):
            return State.FLY_TO_CUE if ctx.has_live_cue else State.SEARCH
        if isinstance(event, (CueUpdated, CueLost)):
            return kind
    elif kind is State.FLY_TO_CUE:
        if isinstance(event, CueLost):
            return State.SEARCH
        if isinstance(event, VisionAcquired):
            return State.VISION_FOLLOW
        if isinstance(event, CueUpdated):
            return kind
    elif kind is State.SEARCH:
        if isinstance(event, CueUpdated):
            return State.FLY_TO_CUE
        if isinstance(event, VisionAcquired):
            return State.VISION_FOLLOW
        if isinstance(event, CueLost):
            return kind
    elif kind is State.RETURN_TO_LAUNCH:
        if isinstance(event, (CueUpdated, CueLost)):
            return kind
    elif kind is State.VISION_FOLLOW:
        if isinstance(event, VisionLost):
            return State.FLY_TO_CUE if ctx.has_live_cue else State.SEARCH
        if isinstance(event, (CueUpdated, CueLost, VisionAcquired)):
            return kind
    return None


def transition(state: MissionState, event: MissionEvent, context: MissionContext = MissionContext()) -> MissionState:
    nxt = _next(state.kind, event, context)
    if nxt is None:
        log.warning("ignoring %s in state %s", type(event).__name__, state.kind)
        return state
    if nxt is state.kind:
        return state
    return MissionState(nxt, context.now)


class Controller(enum.Enum):
    NONE = "none"
    CLIMB_TO_ALTITUDE = "climb-to-altitude"
    WAYPOINT_TO_CUE = "waypoint-to-cue"
    RHC_SEARCH = "rhc-search"
    PID_FOLLOW = "pid-follow"
    RETURN_TO_LAUNCH = "return-to-launch"


_CONTROLLERS = {
    State.ON_GROUND: Controller.NONE,
    State.TAKEOFF_TO_ALTITUDE: Controller.CLIMB_TO_ALTITUDE,
    State.FLY_TO_CUE: Controller.WAYPOINT_TO_CUE,
    State.SEARCH: Controller.RHC_SEARCH,
    State.VISION_FOLLOW: Controller.PID_FOLLOW,
    State.RETURN_TO_LAUNCH: Controller.RETURN_TO_LAUNCH,
}


def active_controller(state: MissionState) -> Controller:
    return _CONTROLLERS[state.kind]


@dataclass
class MissionExecutive:
    """Current-state holder that also tracks the radar cue."""

    state: MissionState = field(default_factory=MissionState)
    cue: Optional[Tuple[float, float, float]] = None
    has_live_cue: bool = False

    def handle(self, event: MissionEvent, now: float) -> Optional[Tuple[State, State]]:
        """Apply an event; returns (old, new) when the state changed."""
        if isinstance(event, CueUpdated):
            self.cue = tuple(event.position)
            self.has_live_cue = True
        elif isinstance(event, CueLost):
            self.has_live_cue = False
        before = self.state
        self.state = transition(before, event, MissionContext(now, self.has_live_cue))
        if self.state.kind is not before.kind:
            return before.kind, self.state.kind
        return None

    @property
    def kind(self) -> State:
        return self.state.kind

    @property
    def controller(self) -> Controller:
        return active_controller(self.state)
