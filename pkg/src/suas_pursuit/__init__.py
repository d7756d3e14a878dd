"""Autonomous chase-and-search for small uncrewed aircraft.

Modules: :mod:`geo` (frames and camera geometry), :mod:`filters`,
:mod:`correlator` (radar-to-GPS track association), :mod:`follow` (PID
follow control and chase-geometry analysis), :mod:`search` (belief grid and
receding-horizon planner), :mod:`calibration` (radar orientation fitting),
:mod:`mission` (state machine), :mod:`sim` (scenario simulator) and
:mod:`cli`.
"""

__version__ = "0.1.0"
