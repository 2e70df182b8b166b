"""Occupancy-grid path planning: A* with the Manhattan heuristic and
corner-checkpoint extraction.

Motion is 4-connected with unit step cost, matching a robot that drives
straight hallway segments and makes 90-degree turns only; the Manhattan
distance is therefore an admissible, consistent heuristic.  Tie-breaking is
fixed (lower f, then lower h, then insertion order with neighbors expanded
east, north, west, south) so plans are reproducible.
"""

from __future__ import annotations

import csv
import heapq
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import OutOfBounds, ToolkitError

Cell = tuple[int, int]


class NoPath(ToolkitError):
    """The goal is unreachable from the start."""


class BlockedEndpoint(ToolkitError):
    """A start or goal cell is not walkable."""


class EmptyPath(ToolkitError):
    """A path with no cells has no checkpoints."""


class PathReversal(ToolkitError):
    """A hand-supplied path doubles back on itself; 180-degree turns are not supported."""


class MapFormatError(ToolkitError):
    """A grid-map file does not follow the documented text format."""


class Heading(Enum):
    EAST = (1, 0)
    NORTH = (0, 1)
    WEST = (-1, 0)
    SOUTH = (0, -1)

    @property
    def vector(self) -> Cell:
        return self.value

    @classmethod
    def from_letter(cls, letter: str) -> "Heading":
        try:
            return {"E": cls.EAST, "N": cls.NORTH, "W": cls.WEST, "S": cls.SOUTH}[letter.upper()]
        except KeyError:
            raise ValueError(f"heading must be one of E, N, W, S, got {letter!r}") from None


# neighbor expansion order: east, north, west, south
_NEIGHBORS = (Heading.EAST.value, Heading.NORTH.value, Heading.WEST.value, Heading.SOUTH.value)


class Action(Enum):
    TURN_LEFT_90 = "turn_left_90"
    TURN_RIGHT_90 = "turn_right_90"
    STOP = "stop"


@dataclass(frozen=True, eq=False)
class GridMap:
    """Rectangular occupancy grid; cell (ix, iy) spans cell_size feet per side.

    ``walkable[iy, ix]`` is True where the robot may drive; iy = 0 is the
    south edge (y = 0).
    """

    width: int
    height: int
    cell_size: float = 1.0
    walkable: np.ndarray = None

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise MapFormatError("grid must be at least 1x1")
        mask = np.ones((self.height, self.width), dtype=bool) if self.walkable is None else np.asarray(self.walkable, dtype=bool)
        if mask.shape != (self.height, self.width):
            raise MapFormatError(f"walkable mask shape {mask.shape} != (height, width)")
        if not self.cell_size > 0:
            raise MapFormatError("cell size must be positive")
        object.__setattr__(self, "walkable", mask)

    def __eq__(self, other) -> bool:
        if not isinstance(other, GridMap):
            return NotImplemented
        return (
            (self.width, self.height, self.cell_size) == (other.width, other.height, other.cell_size)
            and np.array_equal(self.walkable, other.walkable)
        )

    def in_bounds(self, cell: Cell) -> bool:
        ix, iy = cell
        return 0 <= ix < self.width and 0 <= iy < self.height

    def is_walkable(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and bool(self.walkable[cell[1], cell[0]])

    def contains_point(self, x: float, y: float) -> bool:
        return 0.0 <= x <= self.width * self.cell_size and 0.0 <= y <= self.height * self.cell_size

    def cell_of(self, x: float, y: float) -> Cell:
        return int(np.floor(x / self.cell_size)), int(np.floor(y / self.cell_size))

    def cell_center(self, cell: Cell) -> tuple[float, float]:
        ix, iy = cell
        return (ix + 0.5) * self.cell_size, (iy + 0.5) * self.cell_size

    def walkable_cells(self) -> list[Cell]:
        """All walkable cells in row-major order (south row first)."""
        return [(ix, iy) for iy in range(self.height) for ix in range(self.width) if self.walkable[iy, ix]]

    @classmethod
    def consume_lines(cls, lines: list[str]) -> tuple["GridMap", list[str]]:
        """Parse the header + grid rows from the front of ``lines``; return the rest."""
        if not lines:
            raise MapFormatError("empty map text")
        fields = lines[0].split()
        if len(fields) != 3:
            raise MapFormatError("first line must be: width height cell_size_ft")
        try:
            width, height, cell_size = int(fields[0]), int(fields[1]), float(fields[2])
        except ValueError as exc:
            raise MapFormatError(f"bad map header: {exc}") from exc
        if len(lines) < 1 + height:
            raise MapFormatError(f"expected {height} grid rows")
        mask = np.zeros((height, width), dtype=bool)
        for iy in range(height):
            row = lines[1 + iy].rstrip("\n")
            if len(row) != width or any(ch not in ".#" for ch in row):
                raise MapFormatError(f"grid row {iy} must be {width} characters of '.' or '#'")
            mask[iy] = [ch == "." for ch in row]
        return cls(width, height, cell_size, mask), lines[1 + height :]

    @classmethod
    def from_text(cls, text: str) -> "GridMap":
        grid, rest = cls.consume_lines(text.splitlines())
        if any(line.strip() for line in rest):
            raise MapFormatError("unexpected trailing content after grid rows")
        return grid

    def to_text(self) -> str:
        from .scan_ingest import format_number

        lines = [f"{self.width} {self.height} {format_number(self.cell_size)}"]
        for iy in range(self.height):
            lines.append("".join("." if self.walkable[iy, ix] else "#" for ix in range(self.width)))
        return "\n".join(lines) + "\n"

    @classmethod
    def load(cls, path) -> "GridMap":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    def save(self, path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")


@dataclass(frozen=True)
class PlannedPath:
    """Cell sequence where consecutive cells are 4-neighbors and none repeats."""

    cells: tuple[Cell, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "cells", tuple((int(ix), int(iy)) for ix, iy in self.cells))
        if len(set(self.cells)) != len(self.cells):
            raise PathReversal("path revisits a cell")
        for a, b in zip(self.cells, self.cells[1:]):
            if abs(a[0] - b[0]) + abs(a[1] - b[1]) != 1:
                raise ToolkitError(f"cells {a} and {b} are not 4-neighbors")

    def __len__(self) -> int:
        return len(self.cells)

    @property
    def cost(self) -> int:
        return len(self.cells) - 1


def manhattan(a: Cell, b: Cell) -> int:
    """Grid distance |ax-bx| + |ay-by|."""
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def astar(grid: GridMap, start: Cell, goal: Cell) -> PlannedPath:
    """Minimum-length 4-connected path from start to goal.

    Expansion order is deterministic: lowest f, then lowest heuristic, then
    push order (neighbors pushed east, north, west, south).
    """
    for name, cell in (("start", start), ("goal", goal)):
        if not grid.in_bounds(cell):
            raise OutOfBounds(f"{name} cell {cell} is outside the {grid.width}x{grid.height} grid")
        if not grid.is_walkable(cell):
            raise BlockedEndpoint(f"{name} cell {cell} is not walkable")
    start = (int(start[0]), int(start[1]))
    goal = (int(goal[0]), int(goal[1]))

    counter = 0
    h0 = manhattan(start, goal)
    frontier: list[tuple[int, int, int, Cell]] = [(h0, h0, counter, start)]
    came_from: dict[Cell, Cell] = {}
    g_score: dict[Cell, int] = {start: 0}
    closed: set[Cell] = set()
    while frontier:
        _, _, _, current = heapq.heappop(frontier)
        if current in closed:
            continue
        closed.add(current)
        if current == goal:
            cells = [current]
            while current in came_from:
                current = came_from[current]
                cells.append(current)
            return PlannedPath(tuple(reversed(cells)))
        for dx, dy in _NEIGHBORS:
            neighbor = (current[0] + dx, current[1] + dy)
            if not grid.is_walkable(neighbor) or neighbor in closed:
                continue
            tentative = g_score[current] + 1
            if tentative < g_score.get(neighbor, np.iinfo(np.int64).max):
                g_score[neighbor] = tentative
                came_from[neighbor] = current
                h = manhattan(neighbor, goal)
                counter += 1
                heapq.heappush(frontier, (tentative + h, h, counter, neighbor))
    raise NoPath(f"no route from {start} to {goal}")


@dataclass(frozen=True)
class Checkpoint:
    """A path cell where the robot acts: turn 90 degrees or stop."""

    cell: Cell
    action: Action


def _cross(d1: Cell, d2: Cell) -> int:
    return d1[0] * d2[1] - d1[1] * d2[0]


def _turn_action(incoming: Cell, outgoing: Cell) -> Action:
    cross = _cross(incoming, outgoing)
    if cross > 0:
        return Action.TURN_LEFT_90
    if cross < 0:
        return Action.TURN_RIGHT_90
    raise PathReversal(f"direction {incoming} cannot reverse to {outgoing}")


def extract_checkpoints(path: PlannedPath, initial_heading: Heading) -> tuple[Checkpoint, ...]:
    """Action-tagged waypoints for a path: one turn checkpoint per corner,
    a Stop checkpoint at the goal.

    The robot is assumed to start facing ``initial_heading``; if the first
    path segment requires one 90-degree turn, a leading turn checkpoint is
    emitted at the start cell.  Doubling straight back is rejected.
    """
    if not path.cells:
        raise EmptyPath("no cells in path")
    if len(path.cells) == 1:
        return (Checkpoint(path.cells[0], Action.STOP),)
    directions = [(b[0] - a[0], b[1] - a[1]) for a, b in zip(path.cells, path.cells[1:])]
    checkpoints: list[Checkpoint] = []
    if directions[0] != initial_heading.vector:
        checkpoints.append(Checkpoint(path.cells[0], _turn_action(initial_heading.vector, directions[0])))
    for i in range(1, len(directions)):
        if directions[i] != directions[i - 1]:
            checkpoints.append(Checkpoint(path.cells[i], _turn_action(directions[i - 1], directions[i])))
    checkpoints.append(Checkpoint(path.cells[-1], Action.STOP))
    return tuple(checkpoints)


def write_plan_csv(checkpoints, sink) -> None:
    """Export a checkpoint plan as CSV rows of (ix, iy, action)."""
    if isinstance(sink, (str, Path)):
        with open(sink, "w", encoding="utf-8", newline="") as fh:
            write_plan_csv(checkpoints, fh)
        return
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(["ix", "iy", "action"])
    for cp in checkpoints:
        writer.writerow([cp.cell[0], cp.cell[1], cp.action.value])
