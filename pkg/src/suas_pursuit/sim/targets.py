"""Scripted trajectories built from line, hold, circle and rectangle segments.

Each segment starts where the previous one ended, so positions are
continuous by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np


@dataclass
class _Piece:
    t0: float
    duration: float
    kind: str
    start: np.ndarray
    end: np.ndarray
    center: np.ndarray = None
    angle0: float = 0.0
    omega: float = 0.0  # rad/s, positive counter-clockwise
    radius: float = 0.0
    climb_rate: float = 0.0

    def at(self, tau: float) -> np.ndarray:
        tau = min(max(tau, 0.0), self.duration)
        if self.kind == "hold" or self.duration == 0:
            return self.start.copy()
        if self.kind == "line":
            return self.start + (self.end - self.start) * (tau / self.duration)
        a = self.angle0 + self.omega * tau
        return np.array([self.center[0] + self.radius * math.cos(a),
                         self.center[1] + self.radius * math.sin(a),
                         self.start[2] + self.climb_rate * tau])


class TargetScript:
    """Piecewise trajectory.  ``segments`` are dicts, e.g.

    * ``{"shape": "line", "to": [e, n, u], "speed": 5}``
    * ``{"shape": "hold", "duration": 4}``
    * ``{"shape": "circle", "center": [e, n], "speed": 5, "turns": 1, "direction": "ccw"}``
    * ``{"shape": "rectangle", "width": 200, "height": 100, "speed": 5, "pause": 5, "laps": 1}``
      (east then north from the current point, pausing at each corner)
    """

    def __init__(self, start: Sequence[float], segments: Sequence[dict] = (), loop: bool = False):
        self.start = np.asarray(start, dtype=float)
        self.loop = loop
        self.pieces: List[_Piece] = []
        cur, t = self.start.copy(), 0.0
        for seg in segments:
            for piece in self._expand(dict(seg), cur, t):
                self.pieces.append(piece)
                t += piece.duration
                cur = piece.at(piece.duration)
        self.duration = t
        self.max_speed = max((self._piece_speed(p) for p in self.pieces), default=0.0)

    @staticmethod
    def _piece_speed(p: _Piece) -> float:
        if p.duration == 0 or p.kind == "hold":
            return 0.0
        if p.kind == "line":
            return float(np.linalg.norm(p.end - p.start) / p.duration)
        return math.hypot(abs(p.omega) * p.radius, p.climb_rate)

    def _expand(self, seg: dict, cur: np.ndarray, t: float) -> List[_Piece]:
        shape = seg.get("shape")
        if shape == "line":
            end = np.asarray(seg["to"], dtype=float)
            speed = float(seg["speed"])
            if speed <= 0:
                raise ValueError("line speed must be positive")
            return [_Piece(t, float(np.linalg.norm(end - cur)) / speed, "line", cur.copy(), end)]
        if shape == "hold":
            return [_Piece(t, float(seg["duration"]), "hold", cur.copy(), cur.copy())]
        if shape == "circle":
            center = np.asarray(seg["center"], dtype=float)[:2]
            radius = float(np.linalg.norm(cur[:2] - center))
            if radius <= 0:
                raise ValueError("circle must start away from its center")
            speed = float(seg["speed"])
            sign = 1.0 if seg.get("direction", "ccw") == "ccw" else -1.0
            if "duration" in seg:
                duration = float(seg["duration"])
            else:
                duration = 2 * math.pi * radius * float(seg.get("turns", 1.0)) / speed
            climb = float(seg.get("climb_rate", 0.0))
            a0 = math.atan2(cur[1] - center[1], cur[0] - center[0])
            p = _Piece(t, duration, "circle", cur.copy(), cur.copy(), center, a0, sign * speed / radius,
                       radius, climb)
            p.end = p.at(duration)
            return [p]
        if shape == "rectangle":
            w, h = float(seg["width"]), float(seg["height"])
            speed, pause = float(seg["speed"]), float(seg.get("pause", 0.0))
            pieces, c, tt = [], cur.copy(), t
            for _ in range(int(seg.get("laps", 1))):
                for d in ((w, 0.0), (0.0, h), (-w, 0.0), (0.0, -h)):
                    end = c + np.array([d[0], d[1], 0.0])
                    line = _Piece(tt, math.hypot(*d) / speed, "line", c.copy(), end)
                    pieces.append(line)
                    tt += line.duration
                    c = end
                    if pause > 0:
                        pieces.append(_Piece(tt, pause, "hold", c.copy(), c.copy()))
                        tt += pause
            return pieces
        raise ValueError(f"unknown segment shape {shape!r}")

    def position(self, t: float) -> np.ndarray:
        if not self.pieces:
            return self.start.copy()
        if self.loop and self.duration > 0:
            t = t % self.duration
        for p in self.pieces:
            if t < p.t0 + p.duration:
                return p.at(t - p.t0)
        last = self.pieces[-1]
        return last.at(last.duration)

    def velocity(self, t: float, dt: float = 1e-3) -> np.ndarray:
        return (self.position(t + dt) - self.position(max(t - dt, 0.0))) / (t + dt - max(t - dt, 0.0))

    def corner_pauses(self) -> List[tuple]:
        """(start, end) times of hold pieces."""
        return [(p.t0, p.t0 + p.duration) for p in self.pieces if p.kind == "hold" and p.duration > 0]

    def moving_intervals(self) -> List[tuple]:
        return [(p.t0, p.t0 + p.duration) for p in self.pieces if p.kind != "hold" and p.duration > 0]
