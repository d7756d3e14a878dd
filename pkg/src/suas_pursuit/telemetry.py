"""Telemetry log, on-disk formats, and run metrics.

* telemetry: CSV, one row per controller tick, after a ``# schema: telemetry v1``
  header line (columns documented in ``docs/telemetry_schema.md``)
* events: one JSON object per line, keys sorted
* belief snapshots: dense text grid dumps

Floats are written with ``repr`` so that a re-read log reproduces the
in-process values exactly.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional

import numpy as np

SCHEMA_VERSION = "telemetry v1"
SCHEMA_LINE = f"# schema: {SCHEMA_VERSION}"
EVENT_SCHEMA = "events v1"
BELIEF_SCHEMA = "belief v1"

COLUMNS = (
    "t", "mission_state", "autonomous",
    "chase_e", "chase_n", "chase_u", "chase_heading",
    "target_e", "target_n", "target_u",
    "cmd_yaw_rate", "cmd_pitch", "cmd_climb_rate", "cmd_hover",
    "rel_azimuth", "rel_elevation", "rel_range", "rel_ground_range",
    "target_in_fov",
    "detected", "det_u", "det_v", "det_w", "det_h",
    "radar_tracks", "associated_id", "associated_owner",
    "belief_gain", "waypoint_e", "waypoint_n", "waypoint_u",
)
_INT = {"autonomous", "cmd_hover", "target_in_fov", "detected", "radar_tracks", "associated_id"}
_STR = {"mission_state", "associated_owner"}

AUTONOMOUS_STATES = frozenset({"VisionFollow"})
FLYOUT_STATES = frozenset({"FlyToCue", "Search"})


class SchemaError(ValueError):
    pass


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _parse(col: str, s: str):
    if s == "":
        return None
    if col in _STR:
        return s
    if col in _INT:
        return int(s)
    return float(s)


class TelemetryLog:
    def __init__(self):
        self.rows: List[Dict[str, object]] = []

    def append(self, **row) -> None:
        unknown = set(row) - set(COLUMNS)
        if unknown:
            raise KeyError(f"unknown telemetry columns: {sorted(unknown)}")
        if self.rows and row["t"] < self.rows[-1]["t"]:
            raise ValueError("telemetry timestamps must be non-decreasing")
        self.rows.append({c: row.get(c) for c in COLUMNS})

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> list:
        return [r[name] for r in self.rows]

    def array(self, name: str) -> np.ndarray:
        return np.array([np.nan if r[name] is None else r[name] for r in self.rows], dtype=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(SCHEMA_LINE + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(r[c]) for c in COLUMNS])
        return buf.getvalue()

    def write(self, path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "TelemetryLog":
        lines = text.splitlines()
        if not lines or lines[0].strip() != SCHEMA_LINE:
            raise SchemaError(f"missing or unsupported schema header (expected {SCHEMA_LINE!r})")
        reader = csv.reader(lines[1:])
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("missing column header") from None
        if tuple(header) != COLUMNS:
            raise SchemaError("column header does not match " + SCHEMA_VERSION)
        log = cls()
        for n, rec in enumerate(reader, start=3):
            if len(rec) != len(COLUMNS):
                raise SchemaError(f"line {n}: expected {len(COLUMNS)} fields, got {len(rec)}")
            try:
                log.rows.append({c: _parse(c, s) for c, s in zip(COLUMNS, rec)})
            except ValueError as exc:
                raise SchemaError(f"line {n}: {exc}") from None
        return log

    @classmethod
    def read(cls, path) -> "TelemetryLog":
        return cls.from_csv(Path(path).read_text())


def events_to_jsonl(events: Iterable[dict]) -> str:
    return "".join(json.dumps(e, sort_keys=True) + "\n" for e in events)


def read_events(path) -> List[dict]:
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]


def belief_to_text(t: float, values: np.ndarray, corner, spacing: float) -> str:
    nx, ny, nz = values.shape
    out = [f"# schema: {BELIEF_SCHEMA}",
           f"# t {t!r}",
           f"# dims {nx} {ny} {nz}",
           f"# spacing {float(spacing)!r}",
           "# corner " + " ".join(repr(float(c)) for c in corner)]
    for k in range(nz):
        out.append(f"# level {k}")
        for j in range(ny):
            out.append(" ".join(f"{v:.9e}" for v in values[:, j, k]))
    return "\n".join(out) + "\n"


def read_belief_text(text: str):
    """Inverse of :func:`belief_to_text`: (t, values, corner, spacing)."""
    meta, rows = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            parts = line[1:].split()
            if parts and parts[0] in ("t", "dims", "spacing", "corner"):
                meta[parts[0]] = parts[1:]
        elif line.strip():
            rows.append([float(x) for x in line.split()])
    nx, ny, nz = (int(x) for x in meta["dims"])
    arr = np.array(rows).reshape(nz, ny, nx).transpose(2, 1, 0)
    return float(meta["t"][0]), arr, tuple(float(c) for c in meta["corner"]), float(meta["spacing"][0])


@dataclass
class MetricsReport:
    fov_containment_fraction: Optional[float]
    detection_fraction: Optional[float]
    association_fraction: Optional[float]
    radar_coverage_fraction: Optional[float]
    cumulative_belief_gain: Optional[float]
    time_to_acquire: Optional[float]
    wrong_association_windows: Optional[int] = None
    autonomous_time: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        # absent metrics are omitted, not zeroed
        return json.dumps({k: v for k, v in self.as_dict().items() if v is not None}, indent=2, sort_keys=True)


def _windows(t: np.ndarray, width: float = 1.0) -> np.ndarray:
    return np.floor((t - t[0]) / width + 1e-9).astype(int)


def compute_metrics(log: TelemetryLog) -> MetricsReport:
    if len(log) == 0:
        return MetricsReport(None, None, None, None, None, None)
    t = log.array("t")
    auto = log.array("autonomous") == 1
    dt = float(np.median(np.diff(t))) if len(t) > 1 else 0.0

    fov = det = None
    if auto.any():
        fov = float(np.mean(log.array("target_in_fov")[auto] == 1))
        det = float(np.mean(log.array("detected")[auto] == 1))

    win = _windows(t)
    n_win = int(win[-1]) + 1
    assoc = log.array("associated_id")
    tracks = log.array("radar_tracks")
    owner = log.column("associated_owner")
    assoc_w = np.zeros(n_win, dtype=bool)
    cover_w = np.zeros(n_win, dtype=bool)
    wrong_w = np.zeros(n_win, dtype=bool)
    for i, w in enumerate(win):
        if not math.isnan(assoc[i]):
            assoc_w[w] = True
            if owner[i] is not None and owner[i] != "chase":
                wrong_w[w] = True
        if tracks[i] > 0:
            cover_w[w] = True
    any_radar = bool(np.any(tracks > 0)) or bool(np.any(~np.isnan(assoc)))

    gains = log.array("belief_gain")
    gains = gains[~np.isnan(gains)]
    cum = float(np.sum(gains)) if len(gains) else None

    states = log.column("mission_state")
    tta = None
    start = next((t[i] for i, s in enumerate(states) if s in FLYOUT_STATES), None)
    if start is not None:
        got = next((t[i] for i, s in enumerate(states) if s == "VisionFollow" and t[i] >= start), None)
        if got is not None:
            tta = float(got - start)

    return MetricsReport(
        fov_containment_fraction=fov,
        detection_fraction=det,
        association_fraction=float(assoc_w.mean()) if any_radar else None,
        radar_coverage_fraction=float(cover_w.mean()) if any_radar else None,
        cumulative_belief_gain=cum,
        time_to_acquire=tta,
        wrong_association_windows=int(wrong_w.sum()) if any_radar else None,
        autonomous_time=float(auto.sum() * dt),
    )
