"""Seeded simulated world: access points with log-distance path loss and a
differential-drive robot with configurable per-wheel gains.

The simulator closes the loop for the whole pipeline without radio
hardware: it renders scans in the same text grammar the parser consumes,
produces synthetic fingerprint datasets, and runs checkpoint-navigation
trials whose every random draw is a pure function of (seed, draw counter).
RSSI follows rssi = p0 - 10 n log10(d / d_ref) + Gaussian(0, sigma),
rounded to integer dBm to match real scan granularity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import OutOfBounds, ToolkitError
from .model import ModelBundle, NoKnownAccessPoints, predict_position
from .navctl import DriveCommand, DrivetrainCalibration, Mode, NavConfig, NavState, nav_step
from .planner import GridMap, Heading, MapFormatError, astar, extract_checkpoints
from .scan_ingest import ScanEntry, ScanSnapshot, aggregate_resamples, build_dataset, format_number, parse_scan_text

_SUBSTEP = 0.01  # seconds; kinematic integration granularity
_SEED_MASK = (1 << 63) - 1


class WorldFormatError(ToolkitError):
    """A world description file is malformed."""


@dataclass(frozen=True)
class AccessPointSim:
    """A simulated AP: position in feet, p0 dBm at the reference distance,
    path-loss exponent n and shadowing noise sigma in dB."""

    mac: str
    ssid: str
    position: tuple[float, float]
    p0: float = -40.0
    path_loss_exponent: float = 3.0
    noise_sigma: float = 2.0

    def __post_init__(self) -> None:
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.path_loss_exponent <= 0:
            raise ValueError("path_loss_exponent must be > 0")


@dataclass(frozen=True)
class SimRobot:
    """Differential-drive robot: pose plus per-wheel actuation gains.

    left_scale < right_scale reproduces a drivetrain that veers left when
    both wheels are commanded equally.
    """

    x: float = 0.0
    y: float = 0.0
    heading: float = 0.0
    wheel_base: float = 0.8
    left_scale: float = 1.0
    right_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.wheel_base <= 0:
            raise ValueError("wheel_base must be positive")
        if self.left_scale <= 0 or self.right_scale <= 0:
            raise ValueError("actuation gains must be positive")

    @property
    def pose(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.heading)


@dataclass(frozen=True)
class SimWorld:
    """A grid map, its access points, a robot, and the world's base seed."""

    grid: GridMap
    aps: tuple[AccessPointSim, ...]
    robot: SimRobot
    rng_seed: int = 0
    reference_distance: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "aps", tuple(self.aps))
        macs = [ap.mac for ap in self.aps]
        if len(set(macs)) != len(macs):
            raise ValueError("duplicate AP MAC addresses")
        for ap in self.aps:
            if not self.grid.contains_point(*ap.position):
                raise ValueError(f"AP {ap.mac} at {ap.position} is outside the map")
        if self.reference_distance <= 0:
            raise ValueError("reference_distance must be positive")


def with_noise_sigma(world: SimWorld, sigma: float) -> SimWorld:
    """Copy of the world with every AP's shadowing noise set to ``sigma``."""
    return replace(world, aps=tuple(replace(ap, noise_sigma=sigma) for ap in world.aps))


def _scan_rng(seed: int, draw_index: int) -> np.random.Generator:
    return np.random.default_rng([seed & _SEED_MASK, draw_index & _SEED_MASK])


def simulate_scan(world: SimWorld, position: tuple[float, float], draw_index: int = 0, seed: int | None = None) -> ScanSnapshot:
    """One scan at a position: an entry per AP, deterministic in (seed, draw_index).

    Distances are clamped below at the reference distance; RSSI is rounded
    to the nearest integer dBm (and capped at 0, the strongest value a scan
    can report).
    """
    x, y = float(position[0]), float(position[1])
    if not world.grid.contains_point(x, y):
        raise OutOfBounds(f"scan position ({x}, {y}) is outside the map")
    rng = _scan_rng(world.rng_seed if seed is None else seed, draw_index)
    entries = []
    for ap in world.aps:
        d = max(math.hypot(x - ap.position[0], y - ap.position[1]), world.reference_distance)
        level = ap.p0 - 10.0 * ap.path_loss_exponent * math.log10(d / world.reference_distance)
        level += ap.noise_sigma * rng.standard_normal()
        rssi = min(0, int(math.floor(level + 0.5)))
        entries.append(ScanEntry(ap.mac, ap.ssid, rssi))
    return ScanSnapshot(tuple(entries))


def render_scan_text(snapshot: ScanSnapshot) -> str:
    """Format a snapshot in the scan-tool text grammar the parser consumes."""
    lines = []
    for i, entry in enumerate(snapshot.entries, start=1):
        quality = max(0, min(70, entry.rssi + 110))
        lines.append(f"          Cell {i:02d} - Address: {entry.mac}")
        lines.append(f'                    ESSID:"{entry.ssid}"')
        lines.append("                    Frequency:5.18 GHz (Channel 36)")
        lines.append(f"                    Quality={quality}/70  Signal level={entry.rssi} dBm")
    return "\n".join(lines) + "\n"


def step_robot(robot: SimRobot, command: DriveCommand, dt: float) -> SimRobot:
    """Advance the robot dt seconds under a constant wheel command.

    Standard differential-drive kinematics on the effective (gain-scaled)
    wheel speeds: v = (vl + vr) / 2, omega = (vr - vl) / wheel_base,
    integrated exactly along circular arcs in substeps of at most 0.01 s.
    Turns wrap the heading to (-pi, pi]; straight motion leaves it untouched.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    vl = command.left_speed * robot.left_scale
    vr = command.right_speed * robot.right_scale
    v = 0.5 * (vl + vr)
    omega = (vr - vl) / robot.wheel_base
    x, y, theta = robot.x, robot.y, robot.heading
    turning = abs(omega) >= 1e-12
    remaining = dt
    while remaining > 1e-12:
        h = min(_SUBSTEP, remaining)
        if not turning:
            x += v * h * math.cos(theta)
            y += v * h * math.sin(theta)
        else:
            theta_next = theta + omega * h
            radius = v / omega
            x += radius * (math.sin(theta_next) - math.sin(theta))
            y -= radius * (math.cos(theta_next) - math.cos(theta))
            theta = theta_next
        remaining -= h
    if turning:  # straight motion keeps the heading bit-exactly
        theta = math.atan2(math.sin(theta), math.cos(theta))
        if theta <= -math.pi:
            theta = math.pi
    return replace(robot, x=x, y=y, heading=theta)


def default_calibration(robot: SimRobot, turn_speed: float = 1.0) -> DrivetrainCalibration:
    """Calibration a bench procedure would produce for this drivetrain.

    The veer bias equalizes the effective wheel speeds (left gain / right
    gain - 1, negative when the left wheel is the weak one); the 90-degree
    duration assumes the mean of the two gains on the driving wheel, so each
    pivot carries a small residual error when the gains differ - just like a
    stopwatch-calibrated turn.
    """
    veer_bias = robot.left_scale / robot.right_scale - 1.0
    mean_gain = 0.5 * (robot.left_scale + robot.right_scale)
    duration = (math.pi / 2.0) * robot.wheel_base / (turn_speed * mean_gain)
    return DrivetrainCalibration(veer_bias=veer_bias, turn_speed=turn_speed, turn_90_duration=duration)


def generate_synthetic_dataset(world: SimWorld, cells=None, resamples: int = 3, seed: int | None = None):
    """Fingerprint dataset over walkable cell centers.

    Each cell is scanned ``resamples`` times (distinct draw indices), the
    scans are rendered to text and re-parsed (keeping the ingestion path
    honest), aggregated by per-AP median, and labelled with the cell center.
    Rows follow row-major cell order.
    """
    if resamples < 1:
        raise ValueError("resamples must be >= 1")
    if cells is None:
        cells = world.grid.walkable_cells()
    samples = []
    for i, cell in enumerate(cells):
        center = world.grid.cell_center(cell)
        reps = []
        for j in range(resamples):
            snapshot = simulate_scan(world, center, draw_index=i * resamples + j, seed=seed)
            entries = parse_scan_text(render_scan_text(snapshot))
            reps.append(ScanSnapshot(tuple(entries), center))
        samples.append(aggregate_resamples(reps))
    return build_dataset(samples)


def mean_fix_error(world: SimWorld, bundle: ModelBundle, draws_per_cell: int = 3, seed: int = 0) -> float:
    """Mean Euclidean error (feet) of model fixes over all walkable cell centers."""
    errors = []
    draw = 0
    for cell in world.grid.walkable_cells():
        center = world.grid.cell_center(cell)
        for _ in range(draws_per_cell):
            snapshot = simulate_scan(world, center, draw_index=draw, seed=seed)
            draw += 1
            estimate = predict_position(bundle, snapshot)
            errors.append(math.hypot(estimate.x - center[0], estimate.y - center[1]))
    return float(np.mean(errors))


@dataclass
class TrialResult:
    """Outcome record of one closed-loop navigation trial."""

    success: bool
    final_error: float
    trajectory: list = field(default_factory=list)  # (x, y, heading) per integration substep
    fixes: list = field(default_factory=list)  # (true position, estimate or None)
    commands: list = field(default_factory=list)  # (timestamp, left, right, duration, reason)
    events: list = field(default_factory=list)  # ("fix"|"nofix"|"command", timestamp, payload)
    reason: str = ""
    success_radius: float = 0.0
    seed: int = 0


def run_trial(
    world: SimWorld,
    bundle: ModelBundle | None,
    start,
    goal,
    nav_config: NavConfig | None = None,
    success_radius: float = 2.0,
    seed: int = 0,
    *,
    oracle: bool = False,
    calibration: DrivetrainCalibration | None = None,
    max_fixes: int = 500,
    scan_period: float = 2.0,
) -> TrialResult:
    """One closed-loop navigation trial: scan, predict, step, drive.

    The robot starts at the start cell center facing along the first path
    segment.  Each iteration simulates a scan at the true pose, produces a
    fix (the model's estimate, or the true position when ``oracle``), feeds
    it to the navigation state machine and integrates the emitted command.
    The trial ends on Done, Aborted, or after ``max_fixes`` fixes.  Success
    means Done with the true position within ``success_radius`` feet of the
    goal center and a trajectory that never left walkable cells.
    """
    if bundle is None and not oracle:
        raise ValueError("a model bundle is required unless oracle localization is enabled")
    config = nav_config or NavConfig()
    path = astar(world.grid, start, goal)
    if len(path.cells) >= 2:
        first = (path.cells[1][0] - path.cells[0][0], path.cells[1][1] - path.cells[0][1])
        heading = Heading(first)
    else:
        heading = Heading.EAST
    checkpoints = extract_checkpoints(path, heading)
    cal = calibration or default_calibration(world.robot)
    state = NavState.initial(checkpoints, config, cal, world.grid.cell_size)

    sx, sy = world.grid.cell_center(start)
    gx, gy = world.grid.cell_center(goal)
    robot = replace(world.robot, x=sx, y=sy, heading=math.atan2(heading.vector[1], heading.vector[0]))

    result = TrialResult(False, 0.0, success_radius=success_radius, seed=seed)
    result.trajectory.append(robot.pose)
    on_walkable = True
    clock = 0.0
    reason = "fix_budget"
    for draw_index in range(max_fixes):
        if not world.grid.contains_point(robot.x, robot.y):
            on_walkable = False
            reason = "left_map"
            break
        snapshot = simulate_scan(world, (robot.x, robot.y), draw_index=draw_index, seed=seed)
        clock += scan_period
        if oracle:
            fix = (robot.x, robot.y)
        else:
            try:
                estimate = predict_position(bundle, snapshot)
                fix = (estimate.x, estimate.y)
            except NoKnownAccessPoints:
                fix = None
        result.fixes.append(((robot.x, robot.y), fix))
        result.events.append(("fix" if fix is not None else "nofix", clock, fix))
        state, command = nav_step(state, fix)
        if command is not None:
            result.commands.append((clock, command.left_speed, command.right_speed, command.duration, command.reason))
            result.events.append(("command", clock, command))
            remaining = command.duration
            while remaining > 1e-12:
                h = min(_SUBSTEP, remaining)
                robot = step_robot(robot, command, h)
                remaining -= h
                result.trajectory.append(robot.pose)
                if not world.grid.is_walkable(world.grid.cell_of(robot.x, robot.y)):
                    on_walkable = False
            clock += command.duration
        if state.mode is Mode.DONE:
            reason = "done"
            break
        if state.mode is Mode.ABORTED:
            reason = "aborted"
            break
    result.final_error = math.hypot(robot.x - gx, robot.y - gy)
    if not on_walkable:
        reason += "+left_walkable"
    result.reason = reason
    result.success = reason == "done" and result.final_error <= success_radius
    return result


def corner_success_rate(
    world: SimWorld,
    bundle: ModelBundle | None,
    trials: int,
    base_seed: int = 0,
    start=None,
    goal=None,
    **trial_kwargs,
) -> tuple[float, list[TrialResult]]:
    """Success fraction over seeded trials on a corner route.

    Trials use seeds base_seed .. base_seed + trials - 1; the default route
    is the reference world's corner run.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    start = REFERENCE_START if start is None else start
    goal = REFERENCE_GOAL if goal is None else goal
    results = [run_trial(world, bundle, start, goal, seed=base_seed + i, **trial_kwargs) for i in range(trials)]
    rate = sum(r.success for r in results) / trials
    return rate, results


# ---------------------------------------------------------------------------
# Reference world: an L-shaped corridor of 95 one-foot cells inside a 12x12
# bounding box (two 5 ft wide, 12 ft long legs), six APs, and a robot with a
# mild left veer.  Entirely synthetic; every parameter is configurable.
#
# The bundled corner route runs the south hall and turns 90 degrees at its
# southeast wall corner; the trial noise level REFERENCE_TRIAL_SIGMA is
# calibrated so single-scan fixes carry a mean error near the high-noise
# regime the navigation loop is designed for.

REFERENCE_START = (0, 0)
REFERENCE_GOAL = (11, 3)
REFERENCE_TRIAL_SIGMA = 2.0


def reference_world(noise_sigma: float = 2.0, rng_seed: int = 7) -> SimWorld:
    mask = np.zeros((12, 12), dtype=bool)
    mask[:, :5] = True  # west leg
    mask[:5, :] = True  # south leg
    grid = GridMap(12, 12, 1.0, mask)
    positions = [(0.5, 0.5), (11.5, 0.5), (0.5, 11.5), (11.5, 11.5), (6.0, 0.5), (0.5, 6.0)]
    aps = tuple(
        AccessPointSim(f"02:00:00:00:00:{i + 1:02X}", "LabNet", pos, p0=-40.0, path_loss_exponent=3.0, noise_sigma=noise_sigma)
        for i, pos in enumerate(positions)
    )
    robot = SimRobot(x=0.5, y=0.5, heading=0.0, wheel_base=0.4, left_scale=0.99, right_scale=1.0)
    return SimWorld(grid, aps, robot, rng_seed=rng_seed)


# ---------------------------------------------------------------------------
# World description file: the grid-map text format followed by one line per
# AP, a robot line, and optional seed / refdist lines.  SSIDs in world files
# must not contain whitespace.


def save_world(world: SimWorld, sink) -> None:
    if isinstance(sink, (str, Path)):
        with open(sink, "w", encoding="utf-8", newline="") as fh:
            save_world(world, fh)
        return
    sink.write(world.grid.to_text())
    for ap in world.aps:
        sink.write(
            f"ap {ap.mac} {ap.ssid} {format_number(ap.position[0])} {format_number(ap.position[1])} "
            f"{format_number(ap.p0)} {format_number(ap.path_loss_exponent)} {format_number(ap.noise_sigma)}\n"
        )
    r = world.robot
    sink.write(
        f"robot {format_number(r.x)} {format_number(r.y)} {r.heading!r} "
        f"{format_number(r.wheel_base)} {format_number(r.left_scale)} {format_number(r.right_scale)}\n"
    )
    sink.write(f"seed {world.rng_seed}\n")
    sink.write(f"refdist {format_number(world.reference_distance)}\n")


def load_world(source) -> SimWorld:
    if isinstance(source, (str, Path)):
        return _parse_world(Path(source).read_text(encoding="utf-8"))
    return _parse_world(source.read())


def _parse_world(text: str) -> SimWorld:
    try:
        grid, rest = GridMap.consume_lines(text.splitlines())
    except MapFormatError as exc:
        raise WorldFormatError(f"bad grid block: {exc}") from exc
    aps: list[AccessPointSim] = []
    robot: SimRobot | None = None
    seed = 0
    refdist = 1.0
    for line in rest:
        fields = line.split()
        if not fields:
            continue
        kind = fields[0]
        try:
            if kind == "ap":
                if len(fields) != 8:
                    raise WorldFormatError(f"ap line needs 7 fields: {line!r}")
                mac, ssid = fields[1].upper(), fields[2]
                x, y, p0, n, sigma = map(float, fields[3:8])
                aps.append(AccessPointSim(mac, ssid, (x, y), p0, n, sigma))
            elif kind == "robot":
                if len(fields) != 7:
                    raise WorldFormatError(f"robot line needs 6 fields: {line!r}")
                x, y, heading, wheel_base, left, right = map(float, fields[1:7])
                robot = SimRobot(x, y, heading, wheel_base, left, right)
            elif kind == "seed":
                seed = int(fields[1])
            elif kind == "refdist":
                refdist = float(fields[1])
            else:
                raise WorldFormatError(f"unknown directive {kind!r}")
        except (ValueError, IndexError) as exc:
            raise WorldFormatError(f"bad world line {line!r}: {exc}") from exc
    if robot is None:
        raise WorldFormatError("world file has no robot line")
    try:
        return SimWorld(grid, tuple(aps), robot, seed, refdist)
    except ValueError as exc:
        raise WorldFormatError(str(exc)) from exc
