import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from suas_pursuit.geo import (BoundingBox, CameraModel, EnuPoint, FrameError, GeodeticPoint, OwnshipPose, Quaternion,
                              enu_to_camera, enu_to_geodetic, geodetic_to_enu, in_camera_view, pixel_to_direction,
                              project_to_pixel, rotate, target_enu_from_bbox, wrap_degrees, compass_bearing)

WGS84_A = 6378137.0
WGS84_F = 1 / 298.257223563

EQ = GeodeticPoint(0.0, 0.0, 0.0)
SITE = GeodeticPoint(42.444, -71.23, 60.0)


def meridian_radius(lat_deg):
    e2 = WGS84_F * (2 - WGS84_F)
    s = math.sin(math.radians(lat_deg))
    return WGS84_A * (1 - e2) / (1 - e2 * s * s) ** 1.5


def level_pose(yaw=0.0, pos=(0.0, 0.0, 0.0), origin=SITE):
    return OwnshipPose(EnuPoint(*pos, origin=origin), Quaternion.from_euler(yaw))


def test_origin_maps_to_zero():
    e = geodetic_to_enu(SITE, SITE)
    assert (e.east, e.north, e.up) == (0.0, 0.0, 0.0)


def test_small_northward_step_matches_meridian_radius():
    e = geodetic_to_enu(GeodeticPoint(1e-4, 0.0, 0.0), EQ)
    expected = meridian_radius(0.0) * math.radians(1e-4)
    assert abs(expected - 11.06) < 0.01
    assert e.north == pytest.approx(expected, abs=0.1)
    assert abs(e.east) < 1e-9 and abs(e.up) < 0.1


def test_altitude_offset_is_up():
    e = geodetic_to_enu(GeodeticPoint(SITE.latitude, SITE.longitude, SITE.altitude + 10), SITE)
    assert np.allclose(e.vector, [0, 0, 10], atol=1e-9)


def test_enu_to_geodetic_inverse_cases():
    g = enu_to_geodetic(EnuPoint(0, 0, 0, origin=SITE))
    assert (g.latitude, g.longitude, g.altitude) == (SITE.latitude, SITE.longitude, SITE.altitude)
    g = enu_to_geodetic(EnuPoint(0.0, 11.06, 0.0, origin=EQ))
    assert g.latitude == pytest.approx(11.06 / (meridian_radius(0.0) * math.radians(1.0)), rel=1e-9)
    assert g.latitude == pytest.approx(1e-4, abs=1e-7)


def test_round_trip_fixed_point():
    p = EnuPoint(100.0, 200.0, 30.0, origin=SITE)
    back = geodetic_to_enu(enu_to_geodetic(p), SITE)
    assert np.linalg.norm(back.vector - p.vector) < 1e-6


@settings(max_examples=200, deadline=None)
@given(st.floats(-5000, 5000), st.floats(-5000, 5000), st.floats(-500, 500),
       st.floats(-80, 80), st.floats(-179, 179))
def test_round_trip_property(e, n, u, lat, lon):
    origin = GeodeticPoint(lat, lon, 12.0)
    p = EnuPoint(e, n, u, origin=origin)
    back = geodetic_to_enu(enu_to_geodetic(p), origin)
    assert np.linalg.norm(back.vector - p.vector) < 1e-6


def test_invalid_geodetic_rejected():
    with pytest.raises(ValueError):
        GeodeticPoint(91.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        GeodeticPoint(0.0, 181.0, 0.0)


def test_mixed_origins_rejected():
    a = EnuPoint(1, 2, 3, origin=SITE)
    b = EnuPoint(1, 2, 3, origin=EQ)
    with pytest.raises(FrameError):
        _ = a - b
    with pytest.raises(FrameError):
        a.distance_to(b)


def test_rotate_identity_and_yaw():
    assert np.array_equal(rotate(Quaternion.identity(), (1, 2, 3)), [1, 2, 3])
    q = Quaternion.from_axis_angle((0, 0, 1), 90)
    assert np.allclose(rotate(q, (1, 0, 0)), (0, 1, 0), atol=1e-9)


unit_quats = st.tuples(*(st.floats(-1, 1) for _ in range(4))).filter(
    lambda t: 0.1 < math.sqrt(sum(x * x for x in t))).map(lambda t: Quaternion(*t).normalized())
vectors = st.tuples(*(st.floats(-1e3, 1e3) for _ in range(3)))


@settings(max_examples=200, deadline=None)
@given(unit_quats, unit_quats, vectors)
def test_composition_is_homomorphism(q1, q2, v):
    lhs = rotate(q2 * q1, v)
    rhs = rotate(q2, rotate(q1, v))
    assert np.allclose(lhs, rhs, atol=1e-8 * (1 + np.linalg.norm(v)))


@settings(max_examples=200, deadline=None)
@given(unit_quats, vectors)
def test_rotation_preserves_norm(q, v):
    assert abs(np.linalg.norm(rotate(q, v)) - np.linalg.norm(v)) <= 1e-9 * max(1.0, np.linalg.norm(v))


@settings(max_examples=100, deadline=None)
@given(unit_quats, unit_quats, unit_quats)
def test_composition_associative(a, b, c):
    assert np.allclose(((a * b) * c).array, (a * (b * c)).array, atol=1e-12)


def test_non_unit_quaternion_refused_for_rotation():
    with pytest.raises(ValueError):
        rotate(Quaternion(2.0, 0, 0, 0), (1, 0, 0))


def test_euler_convention_round_trip():
    q = Quaternion.from_euler(30.0, 10.0, -5.0)
    assert np.allclose(q.to_euler(), (30.0, 10.0, -5.0), atol=1e-9)
    # heading 0 points the nose north, heading 90 east
    assert np.allclose(rotate(Quaternion.from_euler(0.0), (1, 0, 0)), (0, 1, 0), atol=1e-12)
    assert np.allclose(rotate(Quaternion.from_euler(90.0), (1, 0, 0)), (1, 0, 0), atol=1e-12)
    # positive pitch raises the nose
    assert rotate(Quaternion.from_euler(0.0, 10.0), (1, 0, 0))[2] > 0


def test_wrap_and_bearing():
    assert wrap_degrees(180.0) == 180.0
    assert wrap_degrees(-180.0) == 180.0
    assert wrap_degrees(190.0) == pytest.approx(-170.0)
    assert compass_bearing((0, 1)) == pytest.approx(0.0)
    assert compass_bearing((1, 0)) == pytest.approx(90.0)


CAM = CameraModel()


def azimuth_of(d):
    return math.degrees(math.atan2(d[0], d[1]))


def test_center_pixel_is_boresight():
    d = pixel_to_direction((CAM.width_px / 2, CAM.height_px / 2), CAM, level_pose(0.0))
    assert np.allclose(d, (0, 1, 0), atol=1e-12)


def test_right_edge_is_half_fov_off_boresight():
    d = pixel_to_direction((CAM.width_px, CAM.height_px / 2), CAM, level_pose(0.0))
    oracle = math.degrees(math.atan(math.tan(math.radians(45.0)) * (2 * CAM.width_px / CAM.width_px - 1)))
    assert azimuth_of(d) == pytest.approx(oracle, abs=1e-6)
    d90 = pixel_to_direction((CAM.width_px, CAM.height_px / 2), CAM, level_pose(90.0))
    assert wrap_degrees(azimuth_of(d90) - azimuth_of(d)) == pytest.approx(90.0, abs=1e-6)


def test_pixel_outside_image_rejected():
    with pytest.raises(ValueError):
        pixel_to_direction((-1.0, 10.0), CAM, level_pose())


def test_center_box_at_range_ahead():
    b = BoundingBox(CAM.width_px / 2, CAM.height_px / 2, 10, 10)
    p = target_enu_from_bbox(b, CAM, level_pose(0.0), 40.0)
    assert np.allclose(p.vector, (0, 40, 0), atol=1e-9)


def test_tilted_camera_places_target_at_table_setpoint():
    cam = CameraModel.tilted(40.0)
    b = BoundingBox(cam.width_px / 2, cam.height_px / 2, 10, 10)
    p = target_enu_from_bbox(b, cam, level_pose(0.0), 40.0)
    assert p.north == pytest.approx(40 * math.cos(math.radians(40)), abs=1e-9)
    assert -p.up == pytest.approx(40 * math.sin(math.radians(40)), abs=1e-9)
    assert p.north == pytest.approx(30.64, abs=0.01) and -p.up == pytest.approx(25.71, abs=0.01)


def test_projection_round_trip_random_targets():
    rng = np.random.default_rng(3)
    cam = CameraModel.tilted(40.0)
    n = 0
    while n < 100:
        pose = level_pose(rng.uniform(0, 360), rng.uniform(-50, 50, 3))
        u, v = rng.uniform(1, cam.width_px - 1), rng.uniform(1, cam.height_px - 1)
        r = rng.uniform(5, 95)
        tgt = pose.position.vector + r * pixel_to_direction((u, v), cam, pose)
        uv = project_to_pixel(EnuPoint.from_vector(tgt, SITE), cam, pose)
        assert math.hypot(uv[0] - u, uv[1] - v) < 0.5
        b = BoundingBox(u, v, 2, 2)
        back = target_enu_from_bbox(b, cam, pose, r)
        assert np.allclose(back.vector, tgt, atol=1e-6)
        n += 1


def test_frustum_checks():
    cam = CameraModel(max_detection_range=100.0)
    pose = level_pose(0.0)
    assert in_camera_view(EnuPoint(0, 40, 0, origin=SITE), cam, pose)
    assert not in_camera_view(EnuPoint(0, -40, 0, origin=SITE), cam, pose)
    assert not in_camera_view(EnuPoint(0, 1000, 0, origin=SITE), cam, pose)
    assert not in_camera_view(EnuPoint(60, 40, 0, origin=SITE), cam, pose)  # beyond 45 deg half-fov
    c = enu_to_camera((0, 40, 0), cam, pose)
    assert np.allclose(c, (40, 0, 0), atol=1e-12)


def test_camera_and_box_validation():
    with pytest.raises(ValueError):
        CameraModel(horizontal_fov=180.0)
    with pytest.raises(ValueError):
        CameraModel(width_px=0)
    with pytest.raises(ValueError):
        BoundingBox(10, 10, 0, 5)
    b = BoundingBox(5, 5, 20, 20)
    assert not b.within(CAM)
    assert BoundingBox(100, 100, 20, 20).within(CAM)
    assert BoundingBox(1, 1, 4, 9).critical_dimension == pytest.approx(6.0)
