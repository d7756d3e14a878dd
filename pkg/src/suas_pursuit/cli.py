"""Command-line entry point.

Exit codes: 0 success, 1 configuration or input error, 2 runtime error,
3 degenerate calibration fit.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import yaml

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_DEGENERATE = 0, 1, 2, 3

CHASE_ANALYSIS_COLUMNS = ("slant_range_m", "elevation_deg", "ground_range_m", "relative_height_m",
                          "pixels_on_target", "vertical_reaction_s", "horizontal_reaction_s", "acceptable")

log = logging.getLogger("suas_pursuit")


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def cmd_run(args) -> int:
    from .sim.runner import run_scenario
    from .sim.scenario import ScenarioError, load_scenario

    try:
        scn = load_scenario(args.scenario)
    except FileNotFoundError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except ScenarioError as exc:
        _err(f"invalid scenario {exc.args[0].split(':', 1)[0]}")
        for e in exc.errors:
            print(f"  {e}", file=sys.stderr)
        return EXIT_CONFIG
    if args.planner:
        scn.search.planner = args.planner
    try:
        result = run_scenario(scn, args.seed)
        paths = result.write(args.out)
    except Exception as exc:  # noqa: BLE001 - report any simulation failure by exit code
        log.exception("simulation failed")
        _err(f"simulation failed: {exc}")
        return EXIT_RUNTIME
    print(result.metrics.to_json())
    for k, p in paths.items():
        print(f"wrote {k}: {p}", file=sys.stderr)
    return EXIT_OK


def cmd_metrics(args) -> int:
    from .telemetry import SchemaError, TelemetryLog, compute_metrics

    try:
        tlog = TelemetryLog.read(args.telemetry)
    except (OSError, SchemaError) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    print(compute_metrics(tlog).to_json())
    return EXIT_OK


def _sweep(spec, default) -> List[float]:
    if spec is None:
        return list(default)
    if isinstance(spec, dict):
        start, stop, step = float(spec["start"]), float(spec["stop"]), float(spec["step"])
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [start + k * step for k in range(n)]
    return [float(x) for x in spec]


def chase_analysis_rows(config: Optional[dict] = None):
    from .follow import chase_geometry_analysis
    from .geo import CameraModel

    cfg = dict(config or {})
    cam_cfg = dict(cfg.get("camera", {}))
    cam_cfg.pop("tilt_deg", None)
    cam = CameraModel(**cam_cfg)
    return chase_geometry_analysis(
        float(cfg.get("target_size", 0.35)), float(cfg.get("target_vmax_h", 10.0)),
        float(cfg.get("target_vmax_v", 5.0)), cam, float(cfg.get("min_pixels", 15.0)),
        _sweep(cfg.get("ranges"), range(10, 81, 5)), _sweep(cfg.get("elevations"), range(10, 81, 5)))


def write_chase_csv(rows, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CHASE_ANALYSIS_COLUMNS)
    for r in rows:
        w.writerow([r.slant_range, r.elevation, f"{r.ground_range:.3f}", f"{r.relative_height:.3f}",
                    f"{r.pixels_on_target:.3f}", f"{r.vertical_reaction_s:.3f}", f"{r.horizontal_reaction_s:.3f}",
                    int(r.acceptable)])


def cmd_chase_analysis(args) -> int:
    cfg = {}
    if args.config:
        try:
            cfg = yaml.safe_load(Path(args.config).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            _err(f"cannot read config: {exc}")
            return EXIT_CONFIG
    try:
        rows = chase_analysis_rows(cfg)
    except (TypeError, ValueError, KeyError) as exc:
        _err(f"invalid chase-analysis config: {exc}")
        return EXIT_CONFIG
    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_chase_csv(rows, fh)
    else:
        write_chase_csv(rows, sys.stdout)
    return EXIT_OK


def read_radar_csv(path):
    """Columns: track_id, t, range_m, azimuth_deg, elevation_deg."""
    from .calibration import RawRadarTrack

    by_id = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            by_id.setdefault(int(row["track_id"]), []).append(
                (float(row["t"]), float(row["range_m"]), float(row["azimuth_deg"]), float(row["elevation_deg"])))
    tracks = []
    for tid, rows in sorted(by_id.items()):
        rows.sort()
        a = np.array(rows)
        tracks.append(RawRadarTrack(tid, a[:, 0], a[:, 1:]))
    return tracks


def read_gps_csv(path, origin):
    """Columns: t, latitude, longitude, altitude.  Returns times and ENU about ``origin``."""
    from .geo import GeodeticPoint, geodetic_to_enu

    t, enu = [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            t.append(float(row["t"]))
            p = GeodeticPoint(float(row["latitude"]), float(row["longitude"]), float(row["altitude"]))
            enu.append(geodetic_to_enu(p, origin).vector)
    return np.array(t), np.array(enu).reshape(-1, 3)


def read_pose_file(path):
    """YAML with ``position: {latitude, longitude, altitude}`` and ``yaw``/``pitch``/``roll`` guesses."""
    from .calibration import RadarPose
    from .geo import GeodeticPoint

    d = yaml.safe_load(Path(path).read_text()) or {}
    pos = d["position"]
    return RadarPose(GeodeticPoint(float(pos["latitude"]), float(pos["longitude"]), float(pos["altitude"])),
                     float(d.get("yaw", 0.0)), float(d.get("pitch", 0.0)), float(d.get("roll", 0.0)))


def calibration_report(res) -> dict:
    p = res.fitted_pose
    return {
        "method": getattr(res, "method", None),
        "selected_track_id": res.selected_track_id,
        "n_windows": res.n_windows,
        "yaw_deg": p.yaw, "pitch_deg": p.pitch, "roll_deg": p.roll,
        "latitude": p.position.latitude, "longitude": p.position.longitude, "altitude": p.position.altitude,
        "residual_sd_enu_m": list(res.residual_sd_enu),
        "total_residual_m": res.total_residual,
        "converged": res.converged, "low_confidence": res.low_confidence, "experimental": res.experimental,
        "notes": list(res.notes),
    }


def run_calibration(tracks, gps_t, gps_enu, initial, method: str):
    from .calibration import (calibrate_longest, fit_six_parameter, select_best_residual_track,
                              select_longest_track, window_pairs)

    origin = initial.position
    if method == "longest":
        res = calibrate_longest(tracks, gps_t, gps_enu, initial, origin)
    elif method == "best-residual":
        res = select_best_residual_track(tracks, gps_t, gps_enu, initial, origin)
    elif method == "six-param":
        tr = select_longest_track(tracks)
        res = fit_six_parameter(window_pairs(tr, gps_t, gps_enu), initial, origin)
        res.selected_track_id = tr.track_id
    else:
        raise ValueError(f"unknown method {method!r}")
    res.method = method
    return res


def cmd_calibrate(args) -> int:
    from .calibration import CalibrationError

    try:
        initial = read_pose_file(args.pose)
        tracks = read_radar_csv(args.radar)
        gps_t, gps_enu = read_gps_csv(args.gps, initial.position)
    except (OSError, KeyError, ValueError, yaml.YAMLError) as exc:
        _err(f"cannot read calibration inputs: {exc}")
        return EXIT_CONFIG
    try:
        res = run_calibration(tracks, gps_t, gps_enu, initial, args.method)
    except CalibrationError as exc:
        _err(str(exc))
        return EXIT_DEGENERATE
    except ValueError as exc:
        _err(f"calibration failed: {exc}")
        return EXIT_RUNTIME
    report = calibration_report(res)
    text = json.dumps(report, indent=2)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    if res.experimental:
        print("warning: six-parameter fit is experimental", file=sys.stderr)
    if res.low_confidence:
        for n in res.notes:
            print(f"warning: {n}", file=sys.stderr)
        return EXIT_DEGENERATE
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="suas-pursuit", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log at INFO level")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario and write telemetry, events, belief snapshots and metrics")
    r.add_argument("scenario", help="path to a .scenario file")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    r.add_argument("--planner", choices=("rhc", "max_belief"), default=None, help="override the search planner")
    r.set_defaults(func=cmd_run)

    m = sub.add_parser("metrics", help="compute metrics from a telemetry CSV")
    m.add_argument("telemetry")
    m.set_defaults(func=cmd_metrics)

    c = sub.add_parser("chase-analysis", help="tabulate candidate chase positions as CSV")
    c.add_argument("--config", help="YAML with camera, target_size, target_vmax_h/v, min_pixels, ranges, elevations")
    c.add_argument("--out", help="write CSV here instead of stdout")
    c.set_defaults(func=cmd_chase_analysis)

    k = sub.add_parser("calibrate", help="fit the radar orientation from a cooperative flight")
    k.add_argument("--radar", required=True, help="CSV: track_id,t,range_m,azimuth_deg,elevation_deg")
    k.add_argument("--gps", required=True, help="CSV: t,latitude,longitude,altitude")
    k.add_argument("--pose", required=True, help="YAML with surveyed position and initial yaw/pitch/roll")
    k.add_argument("--method", choices=("longest", "best-residual", "six-param"), default="longest")
    k.add_argument("--out", help="also write the JSON result here")
    k.set_defaults(func=cmd_calibrate)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
