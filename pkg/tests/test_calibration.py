import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from suas_pursuit.calibration import (CalibrationError, RadarPose, RawRadarTrack, calibrate_longest,
                                      cartesian_to_rae, fit_orientation, fit_six_parameter, fit_track,
                                      rae_to_cartesian, select_best_residual_track, select_longest_track,
                                      window_pairs)
from suas_pursuit.geo import GeodeticPoint, geodetic_to_enu
from suas_pursuit.sim.radar import calibration_flight

SITE = GeodeticPoint(42.45, -71.25, 50.0)


def rot_matrix(yaw, pitch, roll):
    """Body-to-ENU rotation, heading measured clockwise from north, pitch nose-up."""
    def rx(a):
        c, s = math.cos(a), math.sin(a)
        return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])

    def ry(a):
        c, s = math.cos(a), math.sin(a)
        return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])

    def rz(a):
        c, s = math.cos(a), math.sin(a)
        return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])

    return rz(math.radians(90 - yaw)) @ ry(math.radians(-pitch)) @ rx(math.radians(roll))


# with equal radar and GPS rates on a shared clock the window means coincide
# exactly, so noise-free fits have zero residual
def flight(yaw=10.0, pitch=2.0, roll=1.0, az_span=80.0, el_lo=3.0, el_hi=25.0, dur=216.0, noise=(0, 0, 0),
           seed=0, radar_rate=5.0, gps_rate=10.0, rng_m=250.0):
    """Synthetic path sweeping a wedge in front of the radar, and its radar measurements."""
    rng = np.random.default_rng(seed)
    rot = rot_matrix(yaw, pitch, roll)
    gps_t = np.arange(0.0, dur, 1 / gps_rate)

    def truth(t):
        az = math.radians(-az_span / 2 + az_span * (0.5 - 0.5 * math.cos(2 * math.pi * t / 72.0)))
        el = math.radians(el_lo + (el_hi - el_lo) * (0.5 - 0.5 * math.cos(2 * math.pi * t / 50.0)))
        r = rng_m + 40 * math.sin(2 * math.pi * t / 90.0)
        local = np.array([r * math.cos(el) * math.cos(az), -r * math.cos(el) * math.sin(az), r * math.sin(el)])
        return rot @ local

    gps = np.array([truth(t) for t in gps_t])
    rt = np.arange(0.0, dur, 1 / radar_rate)
    pts = np.array([truth(t) for t in rt]) + rng.normal(size=(len(rt), 3)) * np.asarray(noise)
    local = pts @ rot
    r = np.linalg.norm(local, axis=1)
    rae = np.column_stack([r, np.degrees(np.arctan2(-local[:, 1], local[:, 0])),
                           np.degrees(np.arcsin(local[:, 2] / r))])
    return RawRadarTrack(1, rt, rae), gps_t, gps


def test_rae_round_trip_and_convention():
    xyz = rae_to_cartesian([[100.0, 30.0, 10.0]])
    assert xyz[0, 1] < 0  # clockwise azimuth is to the right, i.e. negative left axis
    assert np.allclose(cartesian_to_rae(xyz), [[100.0, 30.0, 10.0]])


def test_pose_validation():
    assert RadarPose(SITE, yaw=370.0).yaw == pytest.approx(10.0)
    assert RadarPose(SITE, yaw=-10.0).yaw == pytest.approx(350.0)
    with pytest.raises(ValueError):
        RadarPose(SITE, yaw=math.nan)


def track(tid, t0, t1):
    t = np.arange(t0, t1, 0.2)
    return RawRadarTrack(tid, t, np.tile([100.0, 0.0, 5.0], (len(t), 1)))


def test_longest_track_examples():
    trs = [track(1, 0, 12), track(2, 0, 64), track(3, 0, 3)]
    assert select_longest_track(trs).track_id == 2
    assert select_longest_track([trs[0]]) is trs[0]
    same = [RawRadarTrack(5, [0.0, 10.0], np.ones((2, 3))), RawRadarTrack(4, [20.0, 30.0], np.ones((2, 3)))]
    assert select_longest_track(same).track_id == 4
    with pytest.raises(ValueError):
        select_longest_track([])


def test_longest_of_twenty_two():
    fracs = np.linspace(0.005, 0.299, 22)
    rng = np.random.default_rng(1)
    trs = []
    for i, f in enumerate(rng.permutation(fracs)):
        start = rng.uniform(0, 216 * (1 - f))
        trs.append(RawRadarTrack(i + 1, np.linspace(start, start + 216 * f, 20), np.ones((20, 3))))
    best = select_longest_track(trs)
    assert best.lifetime == pytest.approx(0.299 * 216)


def test_window_pairs_constants_and_drops():
    t = np.arange(0.0, 5.0, 0.2)
    tr = RawRadarTrack(1, t, np.tile([100.0, 0.0, 0.0], (len(t), 1)))
    gt = np.concatenate([np.arange(0.0, 2.0, 0.1), np.arange(3.0, 5.0, 0.1)])
    gps = np.tile([1.0, 2.0, 3.0], (len(gt), 1))
    pairs = window_pairs(tr, gt, gps)
    for r, g in pairs:
        assert np.allclose(r, [100, 0, 0]) and np.array_equal(g, [1, 2, 3])
    # windows [2.0, 2.5) and [2.5, 3.0) hold radar but no GPS
    bins = int(math.floor((4.9 - 0.0) / 0.5)) + 1
    assert len(pairs) == bins - 2


def test_window_count_for_long_flight():
    tr, gt, gps = flight(dur=216.0)
    pairs = window_pairs(tr, gt, gps)
    assert abs(len(pairs) - 216.0 / 0.5) <= 1


def test_window_pairs_errors():
    tr = track(1, 0, 5)
    with pytest.raises(ValueError):
        window_pairs(tr, np.arange(10.0, 20.0, 0.1), np.zeros((100, 3)))


def test_noise_free_recovery():
    tr, gt, gps = flight(yaw=10.0, pitch=0.0, roll=0.0, gps_rate=5.0)
    res = fit_track(tr, gt, gps, RadarPose(SITE, 0.0, 0.0, 0.0), SITE)
    assert res.fitted_pose.yaw == pytest.approx(10.0, abs=0.05)
    assert max(res.residual_sd_enu) < 1e-6
    assert not res.low_confidence and res.converged


def test_identity_case():
    tr, gt, gps = flight(yaw=0.0, pitch=0.0, roll=0.0, gps_rate=5.0)
    res = fit_track(tr, gt, gps, RadarPose(SITE), SITE)
    y = res.fitted_pose.yaw
    assert min(y, 360 - y) < 1e-6
    assert abs(res.fitted_pose.pitch) < 1e-6 and abs(res.fitted_pose.roll) < 1e-6


def test_noisy_fit_has_field_sized_residuals():
    tr, gt, gps = flight(noise=(1.0, 1.0, 2.0), seed=4)
    res = fit_track(tr, gt, gps, RadarPose(SITE), SITE)
    sd = res.residual_sd_enu
    # per-window means of 2-3 samples: same order as the metre-level field residuals
    assert all(0.1 < s < 2.5 for s in sd)
    assert sd[2] > sd[0] and sd[2] > sd[1]
    assert res.fitted_pose.yaw == pytest.approx(10.0, abs=0.5)


def test_time_shift_invariance():
    tr, gt, gps = flight(noise=(1.0, 1.0, 2.0), seed=2)
    a = fit_track(tr, gt, gps, RadarPose(SITE), SITE)
    shifted = RawRadarTrack(1, tr.times + 1000.0, tr.rae)
    b = fit_track(shifted, gt + 1000.0, gps, RadarPose(SITE), SITE)
    assert np.allclose(a.residual_sd_enu, b.residual_sd_enu, atol=1e-9)
    assert a.fitted_pose.yaw == pytest.approx(b.fitted_pose.yaw, abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 359), st.floats(-5, 5), st.floats(-5, 5), st.floats(60, 100), st.floats(15, 30))
def test_noise_free_recovery_property(yaw, pitch, roll, az_span, el_span):
    tr, gt, gps = flight(yaw, pitch, roll, az_span=az_span, el_lo=2.0, el_hi=2.0 + el_span, dur=120.0)
    init = RadarPose(SITE, (yaw + 8.0) % 360, 0.0, 0.0)
    res = fit_track(tr, gt, gps, init, SITE)
    p = res.fitted_pose
    dy = (p.yaw - yaw + 180) % 360 - 180
    assert abs(dy) < 0.1 and abs(p.pitch - pitch) < 0.1 and abs(p.roll - roll) < 0.1


def test_collinear_geometry_flagged():
    t = np.arange(0.0, 20.0, 0.2)
    rae = np.column_stack([100 + 5 * t, np.zeros_like(t), np.full_like(t, 10.0)])
    tr = RawRadarTrack(1, t, rae)
    gt = np.arange(0.0, 20.0, 0.1)
    local = rae_to_cartesian(np.column_stack([100 + 5 * gt, 0 * gt, 0 * gt + 10.0]))
    res = fit_track(tr, gt, local, RadarPose(SITE), SITE)
    assert res.low_confidence
    with pytest.raises(ValueError):
        fit_orientation(window_pairs(tr, gt, local)[:2], RadarPose(SITE), SITE)


def test_best_residual_picks_clean_track():
    clean, gt, gps = flight(noise=(0.5, 0.5, 0.5), seed=1, dur=100.0)
    tracks = [RawRadarTrack(3, clean.times, clean.rae)]
    for tid, sd in ((1, 8.0), (2, 15.0), (4, 5.0)):
        noisy, _, _ = flight(noise=(sd, sd, sd), seed=tid, dur=100.0)
        tracks.append(RawRadarTrack(tid, noisy.times, noisy.rae))
    init = RadarPose(SITE)
    fits = {tr.track_id: fit_track(tr, gt, gps, init, SITE).total_residual for tr in tracks}
    best = select_best_residual_track(tracks, gt, gps, init, SITE)
    assert best.selected_track_id == min(fits, key=fits.get) == 3


def test_best_residual_single_track_equals_fit():
    tr, gt, gps = flight(noise=(1.0, 1.0, 2.0), seed=7, dur=80.0)
    a = select_best_residual_track([tr], gt, gps, RadarPose(SITE), SITE)
    b = fit_track(tr, gt, gps, RadarPose(SITE), SITE)
    assert a.residual_sd_enu == b.residual_sd_enu
    assert a.fitted_pose == b.fitted_pose


def test_best_residual_all_degenerate_raises():
    t = np.arange(0.0, 10.0, 0.2)
    tr = RawRadarTrack(1, t, np.tile([100.0, 0.0, 5.0], (len(t), 1)))
    gt = np.arange(0.0, 10.0, 0.1)
    with pytest.raises(CalibrationError):
        select_best_residual_track([tr], gt, np.tile(rae_to_cartesian([[100, 0, 5]]), (len(gt), 1)),
                                   RadarPose(SITE), SITE)


@pytest.mark.parametrize("seed", range(4))
def test_best_never_worse_than_longest(seed):
    truth = RadarPose(SITE, 10.0, 2.0, 1.0)
    tracks, gt, gps = calibration_flight(truth, SITE, duration=120.0, seed=seed)
    init = RadarPose(SITE)
    best = select_best_residual_track(tracks, gt, gps, init, SITE)
    longest = calibrate_longest(tracks, gt, gps, init, SITE)
    assert best.total_residual <= longest.total_residual


def test_six_parameter_well_conditioned():
    offset = np.array([50.0, -30.0, 8.0])
    tr, gt, gps = flight(yaw=20.0, pitch=1.0, roll=-1.0)
    gps = gps + offset  # radar actually sits at ``offset`` from the surveyed point
    truth_pos = SITE
    res = fit_six_parameter(window_pairs(tr, gt, gps), RadarPose(truth_pos, 18.0, 0.0, 0.0), SITE)
    p = res.fitted_pose
    assert res.experimental
    assert abs(p.yaw - 20.0) < 1 and abs(p.pitch - 1.0) < 1 and abs(p.roll + 1.0) < 1
    assert np.linalg.norm(geodetic_to_enu(p.position, SITE).vector - offset) < 5.0


def test_six_parameter_truth_initialized_zero_offset():
    tr, gt, gps = flight(yaw=0.0, pitch=0.0, roll=0.0, gps_rate=5.0)
    res = fit_six_parameter(window_pairs(tr, gt, gps), RadarPose(SITE), SITE)
    assert np.linalg.norm(geodetic_to_enu(res.fitted_pose.position, SITE).vector) < 1e-3
    assert max(res.residual_sd_enu) < 1e-6


def test_six_parameter_short_track_flagged():
    # a few seconds of nearly radial flight: position and orientation trade off freely
    tr, gt, gps = flight(az_span=1.0, el_lo=5.0, el_hi=5.5, dur=4.0, noise=(1.0, 1.0, 2.0), seed=3)
    res = fit_six_parameter(window_pairs(tr, gt, gps), RadarPose(SITE, 30.0, 0.0, 0.0), SITE)
    assert res.experimental and res.low_confidence
    assert any("poorly determined" in n or "ill-conditioned" in n for n in res.notes)
