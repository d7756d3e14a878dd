"""Regenerate the bundled synthetic calibration trace (true yaw 10, pitch 2, roll 1)."""

import csv
from pathlib import Path

import yaml

from suas_pursuit.calibration import RadarPose
from suas_pursuit.geo import EnuPoint, GeodeticPoint, enu_to_geodetic
from suas_pursuit.sim.radar import calibration_flight

OUT = Path(__file__).resolve().parent.parent / "src" / "suas_pursuit" / "data" / "traces"
SITE = GeodeticPoint(42.4440, -71.2300, 60.0)


def main():
    tracks, gps_t, gps = calibration_flight(RadarPose(SITE, 10.0, 2.0, 1.0), SITE, seed=2022)
    OUT.mkdir(parents=True, exist_ok=True)
    with open(OUT / "calibration_radar.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["track_id", "t", "range_m", "azimuth_deg", "elevation_deg"])
        for tr in tracks:
            for t, (r, az, el) in zip(tr.times, tr.rae):
                w.writerow([tr.track_id, f"{t:.3f}", f"{r:.4f}", f"{az:.5f}", f"{el:.5f}"])
    with open(OUT / "calibration_gps.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "latitude", "longitude", "altitude"])
        for t, p in zip(gps_t, gps):
            g = enu_to_geodetic(EnuPoint.from_vector(p, SITE))
            w.writerow([f"{t:.3f}", f"{g.latitude:.9f}", f"{g.longitude:.9f}", f"{g.altitude:.3f}"])
    pose = {"position": {"latitude": SITE.latitude, "longitude": SITE.longitude, "altitude": SITE.altitude},
            "yaw": 0.0, "pitch": 0.0, "roll": 0.0}
    (OUT / "calibration_pose.yaml").write_text(
        "# surveyed radar position with a compass-grade orientation guess\n" + yaml.safe_dump(pose, sort_keys=False))


if __name__ == "__main__":
    main()
