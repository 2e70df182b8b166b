"""Wireless-scan ingestion: parse scan-tool text into RSSI observations and
assemble location-labelled fingerprint datasets.

Scan text grammar (the canonical subset of what command-line wireless scan
tools print): an access-point block starts at a line of the form
``Cell <n> - Address: <MAC>``; inside the block a line ``ESSID:"<name>"``
carries the network name and a line containing ``Signal level=<int> dBm``
carries the RSSI.  Every other line is ignored.

Datasets are row-per-location matrices of RSSI values keyed by AP MAC
address, with the ground-truth ``x``/``y`` coordinates (feet) as the final
two columns.  Access points that were not observed at a location hold the
sentinel value 0 (note: 0 dBm is "stronger" than any real reading, so
downstream feature selection has to cope with the sentinel).
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ToolkitError


class MalformedCell(ToolkitError):
    """A scan cell is missing a required field or carries an invalid value."""


class DuplicateMac(ToolkitError):
    """The same MAC address appears twice within a single scan."""


class BadSignalUnit(ToolkitError):
    """A signal level is not expressed in dBm."""


class MixedLocations(ToolkitError):
    """Snapshots to aggregate carry different location labels."""


class EmptyInput(ToolkitError):
    """An aggregation was requested over zero snapshots."""


class UnlabeledSnapshot(ToolkitError):
    """A snapshot without a location label cannot become a dataset row."""


class SchemaMismatch(ToolkitError):
    """A dataset CSV violates the expected column layout."""


class RaggedRow(ToolkitError):
    """A dataset CSV row has the wrong number of cells."""


MISSING_RSSI = 0.0

_MAC_RE = re.compile(r"^([0-9A-F]{2}:){5}[0-9A-F]{2}$")
_CELL_RE = re.compile(r"^\s*Cell\s+(\d+)\s+-\s+Address:\s*(\S+)\s*$")
_ESSID_RE = re.compile(r'ESSID:"([^"]*)"')
_SIGNAL_RE = re.compile(r"Signal level\s*=\s*(-?\d+)\s*(\S*)")
_SCAN_FILE_RE = re.compile(r"^(-?[0-9](?:[0-9.]*))_(-?[0-9](?:[0-9.]*))_(\d+)\.txt$")


@dataclass(frozen=True)
class ScanEntry:
    """One access point's observation: MAC, network name, RSSI in dBm."""

    mac: str
    ssid: str
    rssi: int

    def __post_init__(self) -> None:
        if not _MAC_RE.match(self.mac):
            raise ValueError(f"not a canonical MAC address: {self.mac!r}")
        if not np.isfinite(self.rssi) or self.rssi > 0:
            raise ValueError(f"RSSI must be finite and <= 0 dBm, got {self.rssi}")


@dataclass(frozen=True)
class ScanSnapshot:
    """One location's set of AP observations, optionally labelled (x, y) feet."""

    entries: tuple[ScanEntry, ...]
    location: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(self.entries))
        seen = set()
        for entry in self.entries:
            if entry.mac in seen:
                raise DuplicateMac(f"MAC {entry.mac} appears twice in one scan")
            seen.add(entry.mac)

    def rssi_by_mac(self) -> dict[str, int]:
        return {e.mac: e.rssi for e in self.entries}


@dataclass(frozen=True, eq=False)
class FingerprintDataset:
    """Row-per-location RSSI matrix plus x/y labels in feet.

    ``rssi`` has shape (rows, len(ap_columns)); absent APs hold 0.
    """

    ap_columns: tuple[str, ...]
    rssi: np.ndarray
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "ap_columns", tuple(self.ap_columns))
        xs = np.asarray(self.x, dtype=float).reshape(-1)
        ys = np.asarray(self.y, dtype=float).reshape(-1)
        rssi = np.asarray(self.rssi, dtype=float)
        if rssi.ndim != 2:
            rssi = rssi.reshape(len(xs), len(self.ap_columns))
        object.__setattr__(self, "rssi", rssi)
        object.__setattr__(self, "x", xs)
        object.__setattr__(self, "y", ys)
        if len(set(self.ap_columns)) != len(self.ap_columns):
            raise SchemaMismatch("duplicate MAC columns")
        if rssi.shape != (len(xs), len(self.ap_columns)) or len(ys) != len(xs):
            raise SchemaMismatch("matrix shape does not match columns and labels")

    @property
    def n_rows(self) -> int:
        return self.rssi.shape[0]

    def rows(self):
        for i in range(self.n_rows):
            yield self.rssi[i], float(self.x[i]), float(self.y[i])

    def __eq__(self, other) -> bool:
        if not isinstance(other, FingerprintDataset):
            return NotImplemented
        return (
            self.ap_columns == other.ap_columns
            and np.array_equal(self.rssi, other.rssi)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
        )


def parse_scan_text(text: str) -> list[ScanEntry]:
    """Parse scan-tool output into entries, in document order.

    Unknown lines inside a cell block are skipped.  A cell missing its
    address, ESSID or signal level is rejected with MalformedCell; a signal
    not expressed in dBm raises BadSignalUnit; a repeated MAC raises
    DuplicateMac.
    """
    entries: list[ScanEntry] = []
    current: dict | None = None
    seen_macs: set[str] = set()

    def finalize(cell: dict | None) -> None:
        if cell is None:
            return
        if cell["ssid"] is None or cell["rssi"] is None:
            missing = "ESSID" if cell["ssid"] is None else "Signal"
            raise MalformedCell(f"cell {cell['label']} is missing its {missing} line")
        if cell["mac"] in seen_macs:
            raise DuplicateMac(f"MAC {cell['mac']} appears twice in one scan")
        seen_macs.add(cell["mac"])
        try:
            entries.append(ScanEntry(cell["mac"], cell["ssid"], cell["rssi"]))
        except ValueError as exc:
            raise MalformedCell(str(exc)) from exc

    for line in text.splitlines():
        cell_match = _CELL_RE.match(line)
        if cell_match:
            finalize(current)
            mac = cell_match.group(2).upper()
            if not _MAC_RE.match(mac):
                raise MalformedCell(f"cell {cell_match.group(1)} has a malformed address {cell_match.group(2)!r}")
            current = {"label": cell_match.group(1), "mac": mac, "ssid": None, "rssi": None}
            continue
        if current is None:
            continue  # preamble before the first cell
        essid_match = _ESSID_RE.search(line)
        if essid_match and current["ssid"] is None:
            current["ssid"] = essid_match.group(1)
            continue
        if "Signal level" in line:
            signal_match = _SIGNAL_RE.search(line)
            if not signal_match or signal_match.group(2) != "dBm":
                raise BadSignalUnit(f"signal not expressed in dBm: {line.strip()!r}")
            if current["rssi"] is None:
                current["rssi"] = int(signal_match.group(1))
    finalize(current)
    return entries


def filter_by_ssid(entries: list[ScanEntry], allowlist: set[str]) -> list[ScanEntry]:
    """Keep exactly the entries whose SSID is in the allowlist, in order."""
    return [e for e in entries if e.ssid in allowlist]


def _low_median(values: list[int]) -> int:
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


def aggregate_resamples(snapshots: list[ScanSnapshot]) -> ScanSnapshot:
    """Merge repeated scans of one location into a single snapshot.

    The output holds the union of observed MACs; each AP's RSSI is the
    median of the values it was actually seen at (the lower of the two
    middles for even counts).  Entry order is lexicographic by MAC so the
    result is deterministic regardless of snapshot order.
    """
    if not snapshots:
        raise EmptyInput("no snapshots to aggregate")
    locations = {s.location for s in snapshots}
    if len(locations) != 1:
        raise MixedLocations(f"snapshots carry {len(locations)} different location labels")
    values: dict[str, list[int]] = {}
    ssids: dict[str, str] = {}
    for snap in snapshots:
        for entry in snap.entries:
            values.setdefault(entry.mac, []).append(entry.rssi)
            ssids.setdefault(entry.mac, entry.ssid)
    merged = tuple(ScanEntry(mac, ssids[mac], _low_median(values[mac])) for mac in sorted(values))
    return ScanSnapshot(merged, snapshots[0].location)


def build_dataset(samples: list[ScanSnapshot]) -> FingerprintDataset:
    """Align labelled snapshots into a fingerprint matrix.

    Columns are the sorted union of all observed MACs; APs missing from a
    snapshot become 0; row order follows the input order.
    """
    for i, snap in enumerate(samples):
        if snap.location is None:
            raise UnlabeledSnapshot(f"snapshot {i} has no location label")
    columns = tuple(sorted({e.mac for s in samples for e in s.entries}))
    index = {mac: j for j, mac in enumerate(columns)}
    rssi = np.full((len(samples), len(columns)), MISSING_RSSI, dtype=float)
    xs = np.zeros(len(samples))
    ys = np.zeros(len(samples))
    for i, snap in enumerate(samples):
        for entry in snap.entries:
            rssi[i, index[entry.mac]] = float(entry.rssi)
        xs[i], ys[i] = snap.location
    return FingerprintDataset(columns, rssi, xs, ys)


def format_number(v: float) -> str:
    """Decimal text that round-trips exactly (integers rendered bare)."""
    f = float(v)
    if f.is_integer():
        return str(int(f))
    return repr(f)


def write_csv(dataset: FingerprintDataset, sink) -> None:
    """Write the dataset as CSV: MAC columns, then literal ``x``, ``y``."""
    if isinstance(sink, (str, Path)):
        with open(sink, "w", encoding="utf-8", newline="") as fh:
            write_csv(dataset, fh)
        return
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(list(dataset.ap_columns) + ["x", "y"])
    for vector, x, y in dataset.rows():
        writer.writerow([format_number(v) for v in vector] + [format_number(x), format_number(y)])


def read_csv(source) -> FingerprintDataset:
    """Read a dataset CSV written by write_csv; the round-trip is bit-exact."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8", newline="") as fh:
            return read_csv(fh)
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaMismatch("empty file: no header row") from None
    if len(header) < 2 or header[-2:] != ["x", "y"]:
        raise SchemaMismatch("header must end with the x and y label columns")
    columns = tuple(header[:-2])
    if len(set(columns)) != len(columns):
        raise SchemaMismatch("duplicate MAC columns in header")
    vectors: list[list[float]] = []
    xs: list[float] = []
    ys: list[float] = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise RaggedRow(f"line {lineno}: expected {len(header)} cells, got {len(row)}")
        try:
            numbers = [float(cell) for cell in row]
        except ValueError as exc:
            raise SchemaMismatch(f"line {lineno}: non-numeric cell") from exc
        vectors.append(numbers[:-2])
        xs.append(numbers[-2])
        ys.append(numbers[-1])
    rssi = np.array(vectors, dtype=float).reshape(len(vectors), len(columns))
    return FingerprintDataset(columns, rssi, np.array(xs), np.array(ys))


def scan_file_label(name: str) -> tuple[float, float, int] | None:
    """Decode ``<x>_<y>_<rep>.txt`` into (x, y, rep); None if not a scan file."""
    match = _SCAN_FILE_RE.match(name)
    if not match:
        return None
    try:
        return float(match.group(1)), float(match.group(2)), int(match.group(3))
    except ValueError:
        return None


def read_scan_directory(
    directory,
    allowlist: set[str] | None = None,
    aggregate: bool = True,
) -> tuple[list[ScanSnapshot], list[tuple[Path, ToolkitError]]]:
    """Replay a directory of scan-text files into labelled snapshots.

    Files are named ``<x>_<y>_<rep>.txt``; repeated scans of one location are
    aggregated unless ``aggregate`` is False.  Returns the snapshots (ordered
    by location, then repetition) together with a list of per-file errors;
    files that fail to parse are reported, not silently dropped.
    """
    directory = Path(directory)
    groups: dict[tuple[float, float], list[tuple[int, Path]]] = {}
    for path in sorted(directory.iterdir()):
        label = scan_file_label(path.name)
        if label is None:
            continue
        x, y, rep = label
        groups.setdefault((x, y), []).append((rep, path))
    snapshots: list[ScanSnapshot] = []
    errors: list[tuple[Path, ToolkitError]] = []
    for location in sorted(groups):
        resamples: list[ScanSnapshot] = []
        for _, path in sorted(groups[location]):
            try:
                entries = parse_scan_text(path.read_text(encoding="utf-8"))
            except ToolkitError as exc:
                errors.append((path, exc))
                continue
            if allowlist is not None:
                entries = filter_by_ssid(entries, allowlist)
            resamples.append(ScanSnapshot(tuple(entries), location))
        if not resamples:
            continue
        if aggregate:
            snapshots.append(aggregate_resamples(resamples))
        else:
            snapshots.extend(resamples)
    return snapshots, errors
