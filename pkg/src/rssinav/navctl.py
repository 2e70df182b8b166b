"""Checkpoint navigation state machine for a differential-drive robot.

The control loop is stop-and-wait: the robot never moves without a fresh
position fix (network scans are slow, seconds per fix), so nav_step emits at
most one drive command per fix event.  A fix near the next checkpoint
triggers that checkpoint's action (90-degree pivot turn or stop); any other
fix triggers a fixed-length forward step with continuous veer compensation.
Repeated missing fixes abort the run rather than letting a blind robot
drive forever.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

from .errors import ToolkitError
from .planner import Action, Checkpoint


class InvalidState(ToolkitError):
    """nav_step was called on a finished (Done/Aborted) state."""


@dataclass(frozen=True)
class NavConfig:
    """Navigation loop parameters; wheel speeds are nominal feet per second."""

    step_distance: float = 2.0
    checkpoint_radius: float = 1.5
    max_consecutive_misses: int = 10
    forward_speed: float = 1.0

    def __post_init__(self) -> None:
        if self.step_distance <= 0 or self.checkpoint_radius <= 0:
            raise ValueError("step_distance and checkpoint_radius must be positive")
        if self.forward_speed <= 0:
            raise ValueError("forward_speed must be positive")
        # a step no longer than the detection band (2 * radius) cannot jump
        # over a checkpoint along its approach axis


@dataclass(frozen=True)
class DrivetrainCalibration:
    """Per-robot drive constants.

    veer_bias is the fractional adjustment applied to the right wheel's
    commanded speed during forward steps; set it to (left gain / right gain)
    - 1 so the effective wheel speeds match and a constant veer cancels.
    turn_90_duration is the measured time for a one-wheel 90-degree pivot at
    turn_speed.
    """

    veer_bias: float = 0.0
    turn_speed: float = 1.0
    turn_90_duration: float = 1.0

    def __post_init__(self) -> None:
        if self.turn_speed <= 0 or self.turn_90_duration <= 0:
            raise ValueError("turn_speed and turn_90_duration must be positive")


@dataclass(frozen=True)
class DriveCommand:
    """One wheel-speed command: speeds in nominal ft/s, duration in seconds."""

    left_speed: float
    right_speed: float
    duration: float
    reason: str = ""

    def __post_init__(self) -> None:
        if self.duration < 0:
            raise ValueError("duration must be >= 0")


class Mode(Enum):
    AWAITING_FIX = "awaiting_fix"
    ADVANCING = "advancing"
    TURNING = "turning"
    DONE = "done"
    ABORTED = "aborted"


def forward_command(config: NavConfig, cal: DrivetrainCalibration) -> DriveCommand:
    """One veer-compensated straight step of step_distance feet."""
    return DriveCommand(
        left_speed=config.forward_speed,
        right_speed=config.forward_speed * (1.0 + cal.veer_bias),
        duration=config.step_distance / config.forward_speed,
        reason="forward",
    )


def turn_command(direction: str, cal: DrivetrainCalibration) -> DriveCommand:
    """A one-wheel pivot: the outer wheel runs at turn_speed for the
    calibrated 90-degree duration, the inner wheel holds still."""
    if direction == "right":
        return DriveCommand(cal.turn_speed, 0.0, cal.turn_90_duration, reason="turn_right_90")
    if direction == "left":
        return DriveCommand(0.0, cal.turn_speed, cal.turn_90_duration, reason="turn_left_90")
    raise ValueError(f"direction must be 'left' or 'right', got {direction!r}")


def stop_command() -> DriveCommand:
    return DriveCommand(0.0, 0.0, 0.0, reason="stop")


@dataclass(frozen=True)
class NavState:
    """Immutable navigation state; nav_step returns the successor state."""

    plan: tuple[Checkpoint, ...]
    config: NavConfig
    calibration: DrivetrainCalibration
    cell_size: float = 1.0
    mode: Mode = Mode.AWAITING_FIX
    next_checkpoint_index: int = 0
    miss_counter: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "plan", tuple(self.plan))
        if self.plan:
            if self.plan[-1].action is not Action.STOP:
                raise ValueError("the final checkpoint must be a Stop")
            if any(cp.action is Action.STOP for cp in self.plan[:-1]):
                raise ValueError("only the final checkpoint may be a Stop")
        if not 0 <= self.next_checkpoint_index <= len(self.plan):
            raise ValueError("checkpoint index out of range")
        if (self.mode is Mode.DONE) != (self.next_checkpoint_index == len(self.plan)) and self.mode is not Mode.ABORTED:
            raise ValueError("Done mode must coincide with an exhausted plan")

    @classmethod
    def initial(
        cls,
        plan,
        config: NavConfig | None = None,
        calibration: DrivetrainCalibration | None = None,
        cell_size: float = 1.0,
    ) -> "NavState":
        plan = tuple(plan)
        mode = Mode.DONE if not plan else Mode.AWAITING_FIX
        return cls(plan, config or NavConfig(), calibration or DrivetrainCalibration(), cell_size, mode)

    def checkpoint_center(self, index: int) -> tuple[float, float]:
        ix, iy = self.plan[index].cell
        return (ix + 0.5) * self.cell_size, (iy + 0.5) * self.cell_size


def nav_step(state: NavState, fix) -> tuple[NavState, DriveCommand | None]:
    """Advance the state machine by one fix event.

    ``fix`` is an (x, y) position estimate in feet, or None when no estimate
    was available (the robot holds position).  Exactly one command or none
    is returned: the next checkpoint's action when the fix falls within
    checkpoint_radius of its cell center, otherwise a forward step.  More
    than max_consecutive_misses successive missing fixes abort the run.
    """
    if state.mode in (Mode.DONE, Mode.ABORTED):
        raise InvalidState(f"nav_step called in terminal mode {state.mode.value}")
    if fix is None:
        misses = state.miss_counter + 1
        if misses > state.config.max_consecutive_misses:
            return replace(state, mode=Mode.ABORTED, miss_counter=misses), None
        return replace(state, mode=Mode.AWAITING_FIX, miss_counter=misses), None

    fx, fy = float(fix[0]), float(fix[1])
    cx, cy = state.checkpoint_center(state.next_checkpoint_index)
    if math.hypot(fx - cx, fy - cy) <= state.config.checkpoint_radius:
        checkpoint = state.plan[state.next_checkpoint_index]
        if checkpoint.action is Action.STOP:
            command = stop_command()
            mode = Mode.DONE
        else:
            command = turn_command("left" if checkpoint.action is Action.TURN_LEFT_90 else "right", state.calibration)
            mode = Mode.TURNING
        next_state = replace(state, mode=mode, next_checkpoint_index=state.next_checkpoint_index + 1, miss_counter=0)
        return next_state, command
    return replace(state, mode=Mode.ADVANCING, miss_counter=0), forward_command(state.config, state.calibration)


def write_command_log(rows, sink) -> None:
    """Write the audit trail of emitted commands.

    Rows are (timestamp, left_speed, right_speed, duration, reason) - one
    per command, in emission order.
    """
    if isinstance(sink, (str, Path)):
        with open(sink, "w", encoding="utf-8", newline="") as fh:
            write_command_log(rows, fh)
        return
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(["timestamp", "left_speed", "right_speed", "duration", "reason"])
    for t, left, right, duration, reason in rows:
        writer.writerow([repr(float(t)), repr(float(left)), repr(float(right)), repr(float(duration)), reason])
