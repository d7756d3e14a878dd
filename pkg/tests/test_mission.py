import logging

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from suas_pursuit.mission import (AIRBORNE, Abort, AltitudeReached, Controller, CueLost, CueUpdated,
                                  MissionContext, MissionExecutive, MissionState, State, TrackValidated,
                                  VisionAcquired, VisionLost, active_controller, transition)

S = State
LIVE = MissionContext(1.0, True)
STALE = MissionContext(1.0, False)


@pytest.mark.parametrize("start,event,ctx,end", [
    (S.ON_GROUND, TrackValidated(), STALE, S.TAKEOFF_TO_ALTITUDE),
    (S.TAKEOFF_TO_ALTITUDE, AltitudeReached(20.0), LIVE, S.FLY_TO_CUE),
    (S.TAKEOFF_TO_ALTITUDE, AltitudeReached(20.0), STALE, S.SEARCH),
    (S.FLY_TO_CUE, CueLost(), STALE, S.SEARCH),
    (S.FLY_TO_CUE, VisionAcquired(), LIVE, S.VISION_FOLLOW),
    (S.SEARCH, CueUpdated((1.0, 2.0, 3.0)), LIVE, S.FLY_TO_CUE),
    (S.SEARCH, VisionAcquired(), STALE, S.VISION_FOLLOW),
    (S.VISION_FOLLOW, VisionLost(), STALE, S.SEARCH),
    (S.VISION_FOLLOW, VisionLost(), LIVE, S.FLY_TO_CUE),
    (S.VISION_FOLLOW, Abort(), LIVE, S.RETURN_TO_LAUNCH),
])
def test_transition_table(start, event, ctx, end):
    out = transition(MissionState(start, 0.0), event, ctx)
    assert out.kind is end
    assert out.entered_at == ctx.now


def test_disallowed_pairs_leave_state_and_warn(caplog):
    st_ = MissionState(S.ON_GROUND, 0.0)
    with caplog.at_level(logging.WARNING, logger="suas_pursuit.mission"):
        assert transition(st_, VisionAcquired(), LIVE) is st_
    assert "ignoring VisionAcquired" in caplog.text
    assert transition(MissionState(S.TAKEOFF_TO_ALTITUDE), VisionAcquired(), LIVE).kind is S.TAKEOFF_TO_ALTITUDE


def test_active_controller():
    assert active_controller(MissionState(S.SEARCH)) is Controller.RHC_SEARCH
    assert active_controller(MissionState(S.VISION_FOLLOW)) is Controller.PID_FOLLOW
    assert active_controller(MissionState(S.ON_GROUND)) is Controller.NONE
    assert active_controller(MissionState(S.TAKEOFF_TO_ALTITUDE)) is Controller.CLIMB_TO_ALTITUDE
    assert active_controller(MissionState(S.FLY_TO_CUE)) is Controller.WAYPOINT_TO_CUE
    assert {active_controller(MissionState(k)) for k in State} == set(Controller)


events = st.one_of(
    st.just(TrackValidated()), st.builds(AltitudeReached, st.floats(0, 100)),
    st.builds(CueUpdated, st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(0, 200))),
    st.just(CueLost()), st.just(VisionAcquired()), st.just(VisionLost()), st.just(Abort()))


@settings(max_examples=300, deadline=None)
@given(st.sampled_from(list(State)), events, st.booleans(), st.floats(0, 1e4))
def test_transition_total_and_deterministic(kind, ev, live, now):
    ctx = MissionContext(now, live)
    a = transition(MissionState(kind, 0.0), ev, ctx)
    b = transition(MissionState(kind, 0.0), ev, ctx)
    assert a == b and isinstance(a.kind, State)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(events, st.booleans()), max_size=40))
def test_event_stream_invariants(stream):
    st_ = MissionState()
    for k, (ev, live) in enumerate(stream):
        nxt = transition(st_, ev, MissionContext(float(k), live))
        if st_.kind is S.ON_GROUND and nxt.kind is not S.ON_GROUND:
            assert isinstance(ev, TrackValidated)
        if st_.kind is S.TAKEOFF_TO_ALTITUDE and nxt.kind in (S.FLY_TO_CUE, S.SEARCH):
            assert isinstance(ev, AltitudeReached)
        if st_.kind is S.RETURN_TO_LAUNCH:
            assert nxt.kind is S.RETURN_TO_LAUNCH
        st_ = nxt


@pytest.mark.parametrize("kind", list(State))
def test_every_state_has_safe_abort(kind):
    out = transition(MissionState(kind), Abort(), STALE)
    if kind in AIRBORNE:
        assert out.kind is S.RETURN_TO_LAUNCH
    else:
        assert out.kind in (S.ON_GROUND, S.RETURN_TO_LAUNCH)


def test_executive_tracks_cue_freshness():
    ex = MissionExecutive()
    assert ex.handle(TrackValidated(), 0.0) == (S.ON_GROUND, S.TAKEOFF_TO_ALTITUDE)
    ex.handle(CueUpdated((10.0, 20.0, 30.0)), 1.0)
    assert ex.has_live_cue and ex.cue == (10.0, 20.0, 30.0)
    assert ex.handle(AltitudeReached(20.0), 2.0) == (S.TAKEOFF_TO_ALTITUDE, S.FLY_TO_CUE)
    ex.handle(VisionAcquired(), 3.0)
    ex.handle(CueLost(), 4.0)
    assert ex.kind is S.VISION_FOLLOW
    assert ex.handle(VisionLost(), 5.0) == (S.VISION_FOLLOW, S.SEARCH)
    assert ex.controller is Controller.RHC_SEARCH
    assert ex.state.entered_at == 5.0
